//! Run configuration: TOML text in, fully resolved [`RunConfig`] out.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use betaplane::dynamics::IntegratorConfig;
use betaplane::sync::{Coupling, InitialSpec, ModesSyncConfig, NodesSyncConfig, SyncCommon};
use betaplane::thresholds::{Constants, GrashofSet};
use betaplane::{ForcingSpec, GridSpec, PhysicalParams};
use serde::{Deserialize, Serialize};

/// Parse or validation failure, with the 1-based line it refers to when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl ConfigError {
    fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError { line, message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Simulate,
    SyncModes,
    SyncNodes,
    Thresholds,
    Sweep,
    CheckBounds,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::SyncModes => "sync-modes",
            Subcommand::SyncNodes => "sync-nodes",
            Subcommand::Thresholds => "thresholds",
            Subcommand::Sweep => "sweep",
            Subcommand::CheckBounds => "check-bounds",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    pub n: usize,
}

fn default_length() -> f64 {
    2.0 * PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub mu: f64,
    /// `inf` switches rotation off.
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_series")]
    pub series: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_series() -> String {
    "series.ndjson".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), series: default_series() }
    }
}

fn default_integrator() -> IntegratorConfig {
    IntegratorConfig { adaptive: true, ..IntegratorConfig::fixed(0.01) }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub cadence: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialSpec,
    /// Snapshot to start from instead of a random field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<PathBuf>,
    /// Cutoff for the high-pass zonal diagnostic; defaults to the
    /// band-limited `kappa_f`, otherwise to `kappa0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highpass_kappa: Option<f64>,
    #[serde(default = "default_true")]
    pub snapshot: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBoundsConfig {
    pub t_end: f64,
    pub cadence: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySelection {
    Modes,
    Nodes,
    #[default]
    Both,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    #[serde(default)]
    pub family: FamilySelection,
    /// Grashof numbers to use instead of those of the built forcing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grashof: Option<GrashofSet>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// `values` are epsilons.
    Zonalization,
    /// `values` are coupling cutoffs `kappa / kappa0`.
    ModesThreshold,
    /// `values` are node counts.
    NodesThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub t_end: f64,
    pub burn_in: f64,
    #[serde(default = "default_cadence")]
    pub cadence: f64,
    #[serde(default = "default_seed_master")]
    pub seed_master: u64,
    #[serde(default = "default_seed_slave")]
    pub seed_slave: u64,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default = "default_tol_converged")]
    pub tol_converged: f64,
    #[serde(default = "default_tol_diverged")]
    pub tol_diverged: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

fn default_cadence() -> f64 {
    1.0
}

fn default_seed_master() -> u64 {
    1
}

fn default_seed_slave() -> u64 {
    2
}

fn default_tol_converged() -> f64 {
    1e-6
}

fn default_tol_diverged() -> f64 {
    1e-1
}

impl SweepConfig {
    pub fn common(&self) -> SyncCommon {
        SyncCommon {
            t_end: self.t_end,
            burn_in: self.burn_in,
            cadence: self.cadence,
            seed_master: self.seed_master,
            seed_slave: self.seed_slave,
            initial: self.initial.clone(),
            tol_converged: self.tol_converged,
            tol_diverged: self.tol_diverged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ParamsConfig,
    /// Absent means unforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSpec>,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, rename = "sync-modes", skip_serializing_if = "Option::is_none")]
    pub sync_modes: Option<ModesSyncConfig>,
    #[serde(default, rename = "sync-nodes", skip_serializing_if = "Option::is_none")]
    pub sync_nodes: Option<NodesSyncConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, rename = "check-bounds", skip_serializing_if = "Option::is_none")]
    pub check_bounds: Option<CheckBoundsConfig>,
}

impl RunConfig {
    /// The single experiment block present.
    pub fn experiment(&self) -> Option<Subcommand> {
        let present = [
            (self.simulate.is_some(), Subcommand::Simulate),
            (self.sync_modes.is_some(), Subcommand::SyncModes),
            (self.sync_nodes.is_some(), Subcommand::SyncNodes),
            (self.thresholds.is_some(), Subcommand::Thresholds),
            (self.sweep.is_some(), Subcommand::Sweep),
            (self.check_bounds.is_some(), Subcommand::CheckBounds),
        ];
        let mut found = present.iter().filter(|p| p.0).map(|p| p.1);
        match (found.next(), found.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    }

    pub fn grid_spec(&self) -> betaplane::Result<GridSpec> {
        GridSpec::new(self.grid.length, self.grid.n)
    }

    pub fn physical_params(&self, grid: &GridSpec) -> betaplane::Result<PhysicalParams> {
        PhysicalParams::for_grid(self.params.mu, self.params.epsilon, grid)
    }

    /// Applies `--seed`: the experiment's seed, or the master seed with the
    /// slave seed one above it.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(s) = &mut self.simulate {
            s.seed = seed;
        }
        if let Some(s) = &mut self.check_bounds {
            s.seed = seed;
        }
        let pair = |c: &mut SyncCommon| {
            c.seed_master = seed;
            c.seed_slave = seed.wrapping_add(1);
        };
        if let Some(s) = &mut self.sync_modes {
            pair(&mut s.common);
        }
        if let Some(s) = &mut self.sync_nodes {
            pair(&mut s.common);
        }
        if let Some(s) = &mut self.sweep {
            s.seed_master = seed;
            s.seed_slave = seed.wrapping_add(1);
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]` (or at top level for `""`).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                section_line = Some(i + 1);
            }
            continue;
        }
        let in_scope = current == section || (!section.is_empty() && current.starts_with(&format!("{section}.")));
        if in_scope && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    section_line
}

/// First backtick-quoted word of a serde message, e.g. the field in
/// "unknown field `foo`".
fn quoted(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn locate_anywhere(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key)).map(|i| i + 1)
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        let line = e
            .span()
            .map(|span| line_of_offset(text, span.start))
            .or_else(|| quoted(&message).and_then(|k| locate_anywhere(text, k)));
        ConfigError::new(line, message)
    })?;
    validate(&cfg, text)?;
    Ok(cfg)
}

/// Reads a configuration from TOML, or from the JSON written in a run
/// manifest (its `config` member).
pub fn parse_config_file(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(None, format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ConfigError::new(Some(e.line()), e.to_string()))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        let cfg: RunConfig = serde_json::from_value(inner).map_err(|e| ConfigError::new(None, e.to_string()))?;
        validate(&cfg, "")?;
        return Ok(cfg);
    }
    parse_config(&text)
}

fn validate(cfg: &RunConfig, text: &str) -> Result<(), ConfigError> {
    let at = |section: &str, key: &str, msg: String| ConfigError::new(locate(text, section, key), msg);
    let grid = cfg.grid_spec().map_err(|e| at("grid", "n", e.to_string()))?;
    cfg.physical_params(&grid).map_err(|e| at("params", "mu", e.to_string()))?;
    if let Some(f) = &cfg.forcing {
        f.validate().map_err(|e| {
            let msg = e.to_string();
            let key = ["kappa_f", "alpha", "g0", "grashof"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or(if msg.contains("s must") { "s" } else { "class" });
            at("forcing", key, msg)
        })?;
    }
    cfg.integrator.validate().map_err(|e| at("integrator", "dt", e.to_string()))?;
    cfg.constants.validate().map_err(|e| at("constants", "", e.to_string()))?;
    if cfg.experiment().is_none() {
        return Err(ConfigError::new(
            None,
            "exactly one experiment table is required: [simulate], [sync-modes], [sync-nodes], [thresholds], [sweep] or [check-bounds]",
        ));
    }
    let positive = |section: &str, key: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(at(section, key, format!("{key} must be positive, got {v}")))
        }
    };
    if let Some(s) = &cfg.simulate {
        positive("simulate", "t_end", s.t_end)?;
        positive("simulate", "cadence", s.cadence)?;
    }
    if let Some(s) = &cfg.check_bounds {
        positive("check-bounds", "t_end", s.t_end)?;
        positive("check-bounds", "cadence", s.cadence)?;
    }
    if let Some(s) = &cfg.sync_modes {
        s.common.validate().map_err(|e| at("sync-modes", "t_end", e.to_string()))?;
        if !(s.kappa >= 0.0) {
            return Err(at("sync-modes", "kappa", format!("kappa must be nonnegative, got {}", s.kappa)));
        }
    }
    if let Some(s) = &cfg.sync_nodes {
        s.common.validate().map_err(|e| at("sync-nodes", "t_end", e.to_string()))?;
        betaplane::sync::NodeLattice::new(&grid, s.nodes).map_err(|e| at("sync-nodes", "nodes", e.to_string()))?;
    }
    if let Some(s) = &cfg.sweep {
        if s.values.is_empty() {
            return Err(at("sweep", "values", "values must not be empty".into()));
        }
        match s.kind {
            SweepKind::Zonalization => {
                if cfg.forcing.is_none() {
                    return Err(at("sweep", "kind", "the zonalization sweep needs a [forcing] table".into()));
                }
            }
            SweepKind::ModesThreshold => {
                s.common().validate().map_err(|e| at("sweep", "t_end", e.to_string()))?;
            }
            SweepKind::NodesThreshold => {
                s.common().validate().map_err(|e| at("sweep", "t_end", e.to_string()))?;
                let lambda = s.lambda.ok_or_else(|| at("sweep", "kind", "nodes_threshold needs lambda".into()))?;
                positive("sweep", "lambda", lambda)?;
                for &v in &s.values {
                    if v.fract() != 0.0 || v < 1.0 {
                        return Err(at("sweep", "values", format!("node counts must be positive integers, got {v}")));
                    }
                    betaplane::sync::NodeLattice::new(&grid, v as usize)
                        .map_err(|e| at("sweep", "values", e.to_string()))?;
                }
            }
        }
    }
    if cfg.thresholds.is_some() && cfg.forcing.is_none() {
        return Err(ConfigError::new(locate(text, "thresholds", ""), "thresholds need a [forcing] table"));
    }
    Ok(())
}
