//! Subcommand drivers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use betaplane::bounds::{run_monitored, BoundsMonitor, BoundsRecord};
use betaplane::dynamics::{diagnostics, prepare_initial, run, DiagRecord, Observer, SimState, Stepper};
use betaplane::sync::{
    run_modes_sync, run_nodes_sync, threshold_search, zonalization_check, Coupling, ModesSyncConfig,
    NodesSyncConfig, SearchOutcome, SyncResult,
};
use betaplane::thresholds::{grashof_set, modes_threshold, nodes_threshold, Constants, ThresholdCase, ThresholdInputs, ThresholdReport};
use betaplane::{build_forcing, GridSpec, PhysicalParams, SpectralField, ZonalClass};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_config_file, ConfigError, FamilySelection, RunConfig, Subcommand, SweepKind};
use crate::output::{write_manifest, SeriesWriter};
use crate::snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(#[from] betaplane::Error),
    #[error("threshold search: {0}")]
    Inconclusive(String),
    #[error("output: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl CliError {
    /// 2 configuration, 3 numerical blow-up, 4 inconclusive search, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(e) if e.is_blow_up() => 3,
            CliError::Solver(_) => 2,
            CliError::Inconclusive(_) => 4,
            CliError::Io(_) | CliError::Snapshot(_) => 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub series: PathBuf,
    pub summary: Value,
    /// Human-readable report printed by the binary unless `--quiet`.
    pub text: String,
}

pub fn execute(cmd: Subcommand, config: &Path, opts: &RunOptions) -> Result<RunOutput, CliError> {
    run_config(cmd, parse_config_file(config)?, opts)
}

pub fn run_config(cmd: Subcommand, mut cfg: RunConfig, opts: &RunOptions) -> Result<RunOutput, CliError> {
    match cfg.experiment() {
        Some(found) if found == cmd => {}
        Some(found) => {
            return Err(ConfigError {
                line: None,
                message: format!("subcommand {} given a config with a [{}] table", cmd.name(), found.name()),
            }
            .into())
        }
        None => unreachable!("validated configs hold one experiment"),
    }
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &opts.out {
        cfg.output.dir = out.clone();
    }
    let dir = cfg.output.dir.clone();
    write_manifest(&dir, cmd, &cfg)?;
    let series = dir.join(&cfg.output.series);
    let mut writer = SeriesWriter::create(&series)?;
    writer.header(cmd, &cfg)?;
    let ctx = Context::new(&cfg)?;
    let result = match cmd {
        Subcommand::Simulate => simulate(&cfg, &ctx, &dir, &mut writer),
        Subcommand::SyncModes => sync_modes(&cfg, &ctx, &mut writer),
        Subcommand::SyncNodes => sync_nodes(&cfg, &ctx, &mut writer),
        Subcommand::Thresholds => thresholds(&cfg, &ctx, &mut writer),
        Subcommand::Sweep => sweep(&cfg, &ctx, &mut writer),
        Subcommand::CheckBounds => check_bounds(&cfg, &ctx, &mut writer),
    };
    match result {
        Ok((summary, text)) => {
            writer.summary(&summary)?;
            Ok(RunOutput { dir, series, summary, text })
        }
        Err(Failure { error, summary }) => {
            match summary {
                Some(s) => writer.summary(&s)?,
                None => writer.aborted(&error.to_string())?,
            }
            Err(error)
        }
    }
}

/// A failed run, optionally with a summary that still belongs in the file.
struct Failure {
    error: CliError,
    summary: Option<Value>,
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { error: e.into(), summary: None }
    }
}

type Outcome = Result<(Value, String), Failure>;
type Writer = SeriesWriter<io::BufWriter<fs::File>>;

struct Context {
    grid: GridSpec,
    params: PhysicalParams,
    forcing: SpectralField,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let grid = cfg.grid_spec()?;
        let params = cfg.physical_params(&grid)?;
        let forcing = match &cfg.forcing {
            Some(spec) => build_forcing(spec, &grid, &params)?,
            None => SpectralField::zeros(&grid),
        };
        Ok(Context { grid, params, forcing })
    }
}

/// Writes a diagnostic record at every tick, keeping the first I/O error.
struct DiagWriter<'a> {
    writer: &'a mut Writer,
    cadence: f64,
    kappa_f: f64,
    last: Option<DiagRecord>,
    error: Option<io::Error>,
}

impl Observer for DiagWriter<'_> {
    fn cadence(&self) -> f64 {
        self.cadence
    }

    fn observe(&mut self, state: &SimState) -> betaplane::Result<()> {
        let d = diagnostics(state, self.kappa_f)?;
        if let Err(e) = self.writer.record(&d) {
            let msg = e.to_string();
            self.error = Some(e);
            return Err(betaplane::Error::Domain(format!("series write failed: {msg}")));
        }
        self.last = Some(d);
        Ok(())
    }
}

fn initial_state(
    ctx: &Context,
    cfg: &RunConfig,
    restart: Option<&Path>,
    seed: u64,
    initial: &betaplane::sync::InitialSpec,
) -> Result<SimState, CliError> {
    let sym = cfg.integrator.enforce_symmetry;
    match restart {
        Some(path) => {
            let snap = read_snapshot(path)?;
            if snap.field.grid() != &ctx.grid {
                return Err(ConfigError {
                    line: None,
                    message: format!("restart snapshot {} was written on a different grid", path.display()),
                }
                .into());
            }
            let st = snap.into_state();
            Ok(SimState { omega: prepare_initial(&st.omega, sym), ..st })
        }
        None => Ok(SimState::new(0.0, prepare_initial(&initial.build(seed, &ctx.grid), sym))),
    }
}

fn simulate(cfg: &RunConfig, ctx: &Context, dir: &Path, writer: &mut Writer) -> Outcome {
    let sim = cfg.simulate.as_ref().expect("simulate table");
    let state = initial_state(ctx, cfg, sim.restart.as_deref(), sim.seed, &sim.initial)?;
    let kappa_f = sim.highpass_kappa.unwrap_or(match cfg.forcing.as_ref().map(|f| f.zonal_class) {
        Some(ZonalClass::BandLimited { kappa_f }) => kappa_f,
        _ => ctx.params.kappa0,
    });
    let mut stepper = Stepper::new(&ctx.forcing, &ctx.params, &cfg.integrator)?;
    let mut obs = DiagWriter { writer, cadence: sim.cadence, kappa_f, last: None, error: None };
    let result = run(&mut stepper, &state, sim.t_end, &mut [&mut obs]);
    if let Some(e) = obs.error.take() {
        return Err(e.into());
    }
    let end = result?;
    let last = obs.last;
    let mut summary = json!({
        "t": end.t,
        "steps": end.steps,
        "records": writer.records(),
        "final": last,
    });
    if sim.snapshot {
        let path = dir.join("final.bpns");
        write_snapshot(&path, &Snapshot::of_state(&end))?;
        summary["snapshot"] = json!("final.bpns");
    }
    let text = format!("simulate: t = {:.6}, {} steps, {} records", end.t, end.steps, writer.records());
    Ok((summary, text))
}

fn sync_summary(r: &SyncResult) -> Value {
    json!({
        "verdict": r.verdict,
        "ratio": r.ratio,
        "delta_burn_in": r.delta_burn_in,
        "delta_final": r.delta_final,
        "decisive": r.decisive,
        "decay_rate": r.decay_rate,
    })
}

fn write_sync(writer: &mut Writer, r: &SyncResult) -> Result<(), CliError> {
    for rec in &r.series {
        writer.record(rec)?;
    }
    Ok(())
}

fn sync_text(label: &str, r: &SyncResult) -> String {
    format!(
        "{label}: {:?}, |dw(T)|/|dw(burn_in)| = {:.3e} ({:.3e} -> {:.3e})",
        r.verdict, r.ratio, r.delta_burn_in, r.delta_final
    )
}

fn sync_modes(cfg: &RunConfig, ctx: &Context, writer: &mut Writer) -> Outcome {
    let sc = cfg.sync_modes.as_ref().expect("sync-modes table");
    let r = run_modes_sync(sc, &ctx.forcing, &ctx.params, &cfg.integrator)?;
    write_sync(writer, &r)?;
    Ok((sync_summary(&r), sync_text("sync-modes", &r)))
}

fn sync_nodes(cfg: &RunConfig, ctx: &Context, writer: &mut Writer) -> Outcome {
    let sc = cfg.sync_nodes.as_ref().expect("sync-nodes table");
    let r = run_nodes_sync(sc, &ctx.forcing, &ctx.params, &cfg.integrator)?;
    write_sync(writer, &r)?;
    Ok((sync_summary(&r), sync_text("sync-nodes", &r)))
}

fn threshold_inputs(cfg: &RunConfig, ctx: &Context) -> Result<ThresholdInputs, CliError> {
    let spec = cfg.forcing.as_ref().expect("validated: forcing present");
    let grashof = match cfg.thresholds.as_ref().and_then(|t| t.grashof) {
        Some(g) => g,
        None => grashof_set(&ctx.forcing, &ctx.params)?,
    };
    Ok(ThresholdInputs {
        case: ThresholdCase::from_class(&spec.zonal_class, ctx.params.kappa0),
        epsilon: ctx.params.epsilon,
        nu0: ctx.params.nu0(),
        grashof,
    })
}

fn report_text(r: &ThresholdReport) -> String {
    let (what, unit) = match r.family {
        betaplane::thresholds::Family::Modes => ("determining modes", "kappa/kappa0"),
        betaplane::thresholds::Family::Nodes => ("determining nodes", "N"),
    };
    let mut s = format!("{what}: {unit} > {:.6e}\n", r.value());
    s += &format!("  epsilon term      {:.6e}\n", r.epsilon_term);
    s += &format!("  zonal term        {:.6e}\n", r.zonal_term);
    s += &format!("  kappa_f/kappa0    {:.6e}\n", r.kappa_f_over_kappa0);
    s += &format!("  M0                {:.6e}\n", r.m0);
    s += &format!(
        "  epsilon M0        {:.6e} (limit {:.6e}, {})\n",
        r.epsilon_m0,
        r.epsilon_limit,
        if r.epsilon_valid { "valid" } else { "outside the small-epsilon regime" }
    );
    s += &format!("  classical         kappa/kappa0 > {:.6e}, N > {:.6e}\n", r.classical_kappa, r.classical_n);
    s += &format!("  nu0 dependence    {}\n", r.nu0_dependence);
    s
}

fn thresholds(cfg: &RunConfig, ctx: &Context, writer: &mut Writer) -> Outcome {
    let t = cfg.thresholds.as_ref().expect("thresholds table");
    let inputs = threshold_inputs(cfg, ctx)?;
    let mut reports = Vec::new();
    if t.family != FamilySelection::Nodes {
        reports.push(modes_threshold(&inputs, &cfg.constants)?);
    }
    if t.family != FamilySelection::Modes {
        reports.push(nodes_threshold(&inputs, &cfg.constants)?);
    }
    let mut text = String::new();
    let mut summary = json!({});
    for r in &reports {
        writer.record(r)?;
        text += &report_text(r);
        let key = match r.family {
            betaplane::thresholds::Family::Modes => "kappa_over_kappa0",
            betaplane::thresholds::Family::Nodes => "n_nodes",
        };
        summary[key] = json!(r.value());
    }
    Ok((summary, text.trim_end().to_string()))
}

#[derive(Serialize)]
struct SweepRecord {
    value: f64,
    verdict: betaplane::sync::Verdict,
    ratio: f64,
    control: bool,
}

fn sweep(cfg: &RunConfig, ctx: &Context, writer: &mut Writer) -> Outcome {
    let sw = cfg.sweep.as_ref().expect("sweep table");
    match sw.kind {
        SweepKind::Zonalization => {
            let w0 = prepare_initial(&sw.initial.build(sw.seed_master, &ctx.grid), cfg.integrator.enforce_symmetry);
            let rows = zonalization_check(
                &ctx.forcing,
                &ctx.params,
                &sw.values,
                sw.t_end,
                sw.burn_in,
                &w0,
                &cfg.integrator,
                &cfg.constants,
            )?;
            for r in &rows {
                writer.record(r)?;
            }
            let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].sup_nonzonal / w[1].sup_nonzonal).collect();
            let text = format!("zonalization: {} rows, consecutive sup ratios {:?}", rows.len(), ratios);
            Ok((json!({ "rows": rows.len(), "consecutive_ratios": ratios }), text))
        }
        SweepKind::ModesThreshold | SweepKind::NodesThreshold => {
            let common = sw.common();
            let k0 = ctx.params.kappa0;
            let modes = sw.kind == SweepKind::ModesThreshold;
            let smallest_nodes = sw.values.iter().cloned().fold(f64::INFINITY, f64::min) as usize;
            let coupling = sw.coupling.unwrap_or(Coupling::Replace);
            let outcome = threshold_search(&sw.values, 0.0, |v| {
                if modes {
                    let c = ModesSyncConfig { kappa: v * k0, coupling, common: common.clone() };
                    run_modes_sync(&c, &ctx.forcing, &ctx.params, &cfg.integrator)
                } else {
                    // the control keeps a lattice and switches the gain off
                    let (nodes, lambda) = if v == 0.0 { (smallest_nodes, 0.0) } else { (v as usize, sw.lambda.unwrap_or(0.0)) };
                    let c = NodesSyncConfig { nodes, lambda, common: common.clone() };
                    run_nodes_sync(&c, &ctx.forcing, &ctx.params, &cfg.integrator)
                }
            })?;
            let table = match &outcome {
                SearchOutcome::Threshold { table, .. } | SearchOutcome::Inconclusive { table, .. } => table.clone(),
                SearchOutcome::TooDissipative { control } => vec![*control],
            };
            for (i, e) in table.iter().enumerate() {
                writer.record(&SweepRecord { value: e.value, verdict: e.verdict, ratio: e.ratio, control: i == 0 })?;
            }
            let mut summary = serde_json::to_value(&outcome).map_err(io::Error::other)?;
            if let Some(m) = summary.as_object_mut() {
                m.remove("table");
                if let Some(inputs) = cfg.forcing.as_ref().and_then(|_| threshold_inputs(cfg, ctx).ok()) {
                    let eval = if modes { modes_threshold } else { nodes_threshold };
                    if let Ok(r) = eval(&inputs, &cfg.constants) {
                        m.insert("theory_configured_constants".into(), json!(r.value()));
                    }
                    if let Ok(r) = eval(&inputs, &Constants::default()) {
                        m.insert("theory_unit_constants".into(), json!(r.value()));
                    }
                }
            }
            match outcome {
                SearchOutcome::Threshold { value, .. } => {
                    let label = if modes { "kappa*/kappa0" } else { "N*" };
                    Ok((summary, format!("threshold search: empirical {label} = {value}")))
                }
                SearchOutcome::TooDissipative { .. } => Err(Failure {
                    error: CliError::Inconclusive(
                        "regime too dissipative: the uncoupled control run converged".into(),
                    ),
                    summary: Some(summary),
                }),
                SearchOutcome::Inconclusive { reason, .. } => {
                    Err(Failure { error: CliError::Inconclusive(reason), summary: Some(summary) })
                }
            }
        }
    }
}

fn check_bounds(cfg: &RunConfig, ctx: &Context, writer: &mut Writer) -> Outcome {
    let cb = cfg.check_bounds.as_ref().expect("check-bounds table");
    let state = initial_state(ctx, cfg, None, cb.seed, &cb.initial)?;
    let mut stepper = Stepper::new(&ctx.forcing, &ctx.params, &cfg.integrator)?;
    let mut monitor = BoundsMonitor::new(&stepper, &cfg.constants)?;
    let mut io_error = None;
    let mut worst: Option<BoundsRecord> = None;
    let mut observe_count = 0usize;
    let result = run_monitored(&mut stepper, &state, cb.t_end, cb.cadence, &mut monitor, |_, rec| {
        if let Err(e) = writer.record(&rec) {
            let msg = e.to_string();
            io_error = Some(e);
            return Err(betaplane::Error::Domain(format!("series write failed: {msg}")));
        }
        let observed = rec.levels.iter().map(|l| l.check.status).chain([rec.nonzonal.status]);
        observe_count += observed.filter(|s| *s == betaplane::bounds::Status::Observe).count();
        worst = Some(match worst.take() {
            None => rec,
            Some(mut w) => {
                for (a, b) in w.levels.iter_mut().zip(&rec.levels) {
                    if b.check.ratio > a.check.ratio {
                        *a = *b;
                    }
                }
                if rec.nonzonal.ratio > w.nonzonal.ratio {
                    w.nonzonal = rec.nonzonal;
                }
                w
            }
        });
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let end = result?;
    let worst = worst.expect("the initial state is always recorded");
    let summary = json!({
        "t": end.t,
        "steps": end.steps,
        "observe_records": observe_count,
        "max_ratio_levels": worst.levels.iter().map(|l| json!({ "m": l.m, "ratio": l.check.ratio })).collect::<Vec<_>>(),
        "max_ratio_nonzonal": worst.nonzonal.ratio,
    });
    let mut text = format!("check-bounds: t = {:.6}, {observe_count} entries above their bound", end.t);
    for l in &worst.levels {
        text += &format!("\n  m = {}: max ratio {:.3e}", l.m, l.check.ratio);
    }
    text += &format!("\n  non-zonal: max ratio {:.3e}", worst.nonzonal.ratio);
    Ok((summary, text))
}

/// Prints `text` to stdout unless quiet.
pub fn report(out: &RunOutput, quiet: bool) -> io::Result<()> {
    if quiet {
        return Ok(());
    }
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", out.text)?;
    writeln!(stdout, "series: {}", out.series.display())
}
