//! Master-slave synchronization through low modes or nodal values, the
//! zonalization sweep, the direct difference-equation check and nodal
//! inequality estimates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{dealias, differentiate, hs_norm, inv_laplacian, jacobian_with, l2_norm, project_low, zonal_split, Derivative};
use crate::dynamics::{check_finite, eddy_turnover, Clock, IntegratorConfig, Propagator, SimState, Stepper, DT_REFRESH};
use crate::error::{Error, Result};
use crate::field::{forward_values, PhysicalField, SpectralField};
use crate::grid::GridSpec;
use crate::params::PhysicalParams;
use crate::random::{random_field, with_rms, SpectrumProfile};
use crate::thresholds::{grashof_set, m0, Constants};

/// Seeded random initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub profile: SpectrumProfile,
    /// Target `|ω|_{L²} / |M|^{1/2}`.
    pub rms: f64,
    #[serde(default = "default_true")]
    pub y_odd: bool,
}

fn default_true() -> bool {
    true
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { profile: SpectrumProfile::band(1.0, 8.0, -1.0), rms: 1.0, y_odd: true }
    }
}

impl InitialSpec {
    pub fn build(&self, seed: u64, grid: &GridSpec) -> SpectralField {
        with_rms(&random_field(seed, &self.profile, grid, self.y_odd), self.rms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    /// `P_κ ω♯ ← P_κ ω` after every step.
    Replace,
    /// `ω♯ ← ω♯ + λ h P_κ(ω - ω♯)` after every step.
    Nudge { lambda: f64 },
}

/// Settings shared by both synchronization experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncCommon {
    /// Horizon `T`.
    pub t_end: f64,
    /// Coupling switches on at `burn_in`; the verdict compares `|δω(T)|`
    /// with `|δω(burn_in)|`.
    pub burn_in: f64,
    pub cadence: f64,
    pub seed_master: u64,
    pub seed_slave: u64,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default = "default_tol_converged")]
    pub tol_converged: f64,
    #[serde(default = "default_tol_diverged")]
    pub tol_diverged: f64,
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

impl SyncCommon {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.burn_in && self.burn_in >= 0.0) {
            return Err(Error::domain(format!(
                "horizon T = {} must exceed burn_in = {}",
                self.t_end, self.burn_in
            )));
        }
        if !(self.cadence > 0.0) {
            return Err(Error::domain(format!("cadence must be positive, got {}", self.cadence)));
        }
        for (name, v) in [("tol_converged", self.tol_converged), ("tol_diverged", self.tol_diverged)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.tol_converged >= self.tol_diverged {
            return Err(Error::domain("tol_converged must be below tol_diverged"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModesSyncRepr")]
pub struct ModesSyncConfig {
    /// Coupling cutoff wavenumber (absolute).
    pub kappa: f64,
    pub coupling: Coupling,
    #[serde(flatten)]
    pub common: SyncCommon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "NodesSyncRepr")]
pub struct NodesSyncConfig {
    /// Node count, a perfect square whose root divides `n`.
    pub nodes: usize,
    /// Nudging gain (1/time).
    pub lambda: f64,
    #[serde(flatten)]
    pub common: SyncCommon,
}

// Flat forms of the sync configs; `flatten` cannot reject unknown keys.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModesSyncRepr {
    kappa: f64,
    coupling: Coupling,
    t_end: f64,
    burn_in: f64,
    cadence: f64,
    #[serde(default = "default_seed_master")]
    seed_master: u64,
    #[serde(default = "default_seed_slave")]
    seed_slave: u64,
    #[serde(default)]
    initial: InitialSpec,
    #[serde(default = "default_tol_converged")]
    tol_converged: f64,
    #[serde(default = "default_tol_diverged")]
    tol_diverged: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodesSyncRepr {
    nodes: usize,
    lambda: f64,
    t_end: f64,
    burn_in: f64,
    cadence: f64,
    #[serde(default = "default_seed_master")]
    seed_master: u64,
    #[serde(default = "default_seed_slave")]
    seed_slave: u64,
    #[serde(default)]
    initial: InitialSpec,
    #[serde(default = "default_tol_converged")]
    tol_converged: f64,
    #[serde(default = "default_tol_diverged")]
    tol_diverged: f64,
}

impl From<ModesSyncRepr> for ModesSyncConfig {
    fn from(r: ModesSyncRepr) -> Self {
        let common = SyncCommon {
            t_end: r.t_end,
            burn_in: r.burn_in,
            cadence: r.cadence,
            seed_master: r.seed_master,
            seed_slave: r.seed_slave,
            initial: r.initial,
            tol_converged: r.tol_converged,
            tol_diverged: r.tol_diverged,
        };
        ModesSyncConfig { kappa: r.kappa, coupling: r.coupling, common }
    }
}

impl From<NodesSyncRepr> for NodesSyncConfig {
    fn from(r: NodesSyncRepr) -> Self {
        let common = SyncCommon {
            t_end: r.t_end,
            burn_in: r.burn_in,
            cadence: r.cadence,
            seed_master: r.seed_master,
            seed_slave: r.seed_slave,
            initial: r.initial,
            tol_converged: r.tol_converged,
            tol_diverged: r.tol_diverged,
        };
        NodesSyncConfig { nodes: r.nodes, lambda: r.lambda, common }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NotConverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub t: f64,
    /// `|δω|_{L²}`
    pub delta: f64,
    /// `|P_κ δω|` for mode coupling, `η(∇δψ)` for nodal coupling.
    pub observed: f64,
    pub energy_master: f64,
    pub energy_slave: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyncResult {
    pub series: Vec<SyncRecord>,
    pub verdict: Verdict,
    pub delta_burn_in: f64,
    pub delta_final: f64,
    /// `|δω(T)| / |δω(burn_in)|` (0 when both vanish).
    pub ratio: f64,
    /// True when the ratio also clears `tol_diverged`, i.e. the run is
    /// unambiguously on one side.
    pub decisive: bool,
    /// Least-squares slope of `ln|δω|` against `t` after burn-in.
    pub decay_rate: Option<f64>,
}

fn energy(omega: &SpectralField) -> Result<f64> {
    Ok(0.5 * hs_norm(omega, -1.0)?.powi(2))
}

fn label(which: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Run { label: which, source: Box::new(e) }
}

/// Runs master and slave in lockstep; `couple` modifies the slave after
/// each step taken at or after `burn_in`.
fn run_pair(
    common: &SyncCommon,
    forcing: &SpectralField,
    params: &PhysicalParams,
    integrator: &IntegratorConfig,
    mut couple: impl FnMut(&SpectralField, &mut SpectralField, f64) -> Result<()>,
    mut observe: impl FnMut(&SpectralField, &SpectralField) -> Result<f64>,
) -> Result<SyncResult> {
    common.validate()?;
    let grid = forcing.grid();
    let mut sm = Stepper::new(forcing, params, integrator)?;
    let mut ss = sm.clone();
    let init = |seed| {
        let w = common.initial.build(seed, grid);
        SimState::new(0.0, if integrator.enforce_symmetry { crate::calculus::enforce_y_antisymmetry(&w) } else { w })
    };
    let mut master = init(common.seed_master);
    let mut slave = init(common.seed_slave);
    let mut series = Vec::new();
    let mut record = |m: &SimState, s: &SimState, series: &mut Vec<SyncRecord>| -> Result<()> {
        let d = &m.omega - &s.omega;
        series.push(SyncRecord {
            t: m.t,
            delta: l2_norm(&d),
            observed: observe(&m.omega, &s.omega)?,
            energy_master: energy(&m.omega)?,
            energy_slave: energy(&s.omega)?,
        });
        Ok(())
    };
    record(&master, &slave, &mut series)?;
    let mut delta_burn_in = if common.burn_in == 0.0 { Some(l2_norm(&(&master.omega - &slave.omega))) } else { None };
    for (phase_end, coupled) in [(common.burn_in, false), (common.t_end, true)] {
        let mut clock = Clock::new(master.t, phase_end, vec![common.cadence])?;
        let mut dt = sm.suggest_dt(&[&master.omega, &slave.omega])?;
        while let Some((h, t_new)) = clock.step_from(master.t, dt) {
            master = sm.advance(&master, h).map_err(label("master"))?;
            slave = ss.advance(&slave, h).map_err(label("slave"))?;
            master.t = t_new;
            slave.t = t_new;
            if coupled {
                couple(&master.omega, &mut slave.omega, h)?;
                check_finite(&slave.omega, slave.steps, slave.t).map_err(label("slave"))?;
            }
            let due = !clock.due(master.t).is_empty();
            if due {
                record(&master, &slave, &mut series)?;
            }
            if due || master.steps % DT_REFRESH == 0 {
                dt = sm.suggest_dt(&[&master.omega, &slave.omega])?;
            }
        }
        if delta_burn_in.is_none() {
            delta_burn_in = Some(l2_norm(&(&master.omega - &slave.omega)));
        }
    }
    let delta_burn_in = delta_burn_in.unwrap_or(0.0);
    let delta_final = l2_norm(&(&master.omega - &slave.omega));
    let ratio = if delta_burn_in > 0.0 { delta_final / delta_burn_in } else { 0.0 };
    let converged = delta_final <= common.tol_converged * delta_burn_in;
    let decisive = converged || delta_final >= common.tol_diverged * delta_burn_in;
    let decay_rate = fit_log_slope(series.iter().filter(|r| r.t >= common.burn_in).map(|r| (r.t, r.delta)));
    Ok(SyncResult {
        series,
        verdict: if converged { Verdict::Converged } else { Verdict::NotConverged },
        delta_burn_in,
        delta_final,
        ratio,
        decisive,
        decay_rate,
    })
}

fn fit_log_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.filter(|&(_, v)| v > 0.0).map(|(t, v)| (t, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    (den > 0.0).then(|| num / den)
}

/// Low-mode synchronization experiment.
pub fn run_modes_sync(
    cfg: &ModesSyncConfig,
    forcing: &SpectralField,
    params: &PhysicalParams,
    integrator: &IntegratorConfig,
) -> Result<SyncResult> {
    if !(cfg.kappa >= 0.0) {
        return Err(Error::domain(format!("kappa must be nonnegative, got {}", cfg.kappa)));
    }
    if let Coupling::Nudge { lambda } = cfg.coupling {
        if !(lambda >= 0.0) {
            return Err(Error::domain(format!("nudging gain must be nonnegative, got {lambda}")));
        }
    }
    let kappa = cfg.kappa;
    let coupling = cfg.coupling;
    run_pair(
        &cfg.common,
        forcing,
        params,
        integrator,
        |m, s, h| {
            let low = project_low(&(m - s), kappa);
            *s = match coupling {
                Coupling::Replace => &*s + &low,
                Coupling::Nudge { lambda } => s.axpy(lambda * h, &low)?,
            };
            Ok(())
        },
        |m, s| Ok(l2_norm(&project_low(&(m - s), kappa))),
    )
}

/// Regular `m × m` node lattice on the collocation grid, `N = m²`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLattice {
    grid: GridSpec,
    per_side: usize,
    stride: usize,
}

impl NodeLattice {
    pub fn new(grid: &GridSpec, nodes: usize) -> Result<Self> {
        let m = (nodes as f64).sqrt().round() as usize;
        if nodes == 0 || m * m != nodes {
            return Err(Error::domain(format!("node count must be a positive perfect square, got {nodes}")));
        }
        if !grid.n().is_multiple_of(m) {
            return Err(Error::domain(format!(
                "sqrt(N) = {m} must divide the grid size {} so that nodes sit on collocation points",
                grid.n()
            )));
        }
        Ok(NodeLattice { grid: grid.clone(), per_side: m, stride: grid.n() / m })
    }

    pub fn len(&self) -> usize {
        self.per_side * self.per_side
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Node coordinates `(x, y)`, starting at `(0, -L/2)`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.indices().map(|(ix, iy)| (self.grid.x(ix), self.grid.y(iy))).collect()
    }

    fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (m, s) = (self.per_side, self.stride);
        (0..m).flat_map(move |j| (0..m).map(move |i| (i * s, j * s)))
    }

    /// Periodic bilinear interpolant of `u` sampled at the nodes, projected
    /// onto the dealiased mean-zero modes.
    pub fn interpolate(&self, u: &PhysicalField) -> Result<SpectralField> {
        self.grid.check_same(u.grid())?;
        let n = self.grid.n();
        let (m, s) = (self.per_side, self.stride);
        let node = |i: usize, j: usize| u.at((i % m) * s, (j % m) * s);
        let mut out = vec![0.0; n * n];
        for iy in 0..n {
            let (j0, fy) = (iy / s, (iy % s) as f64 / s as f64);
            for ix in 0..n {
                let (i0, fx) = (ix / s, (ix % s) as f64 / s as f64);
                out[iy * n + ix] = (1.0 - fx) * (1.0 - fy) * node(i0, j0)
                    + fx * (1.0 - fy) * node(i0 + 1, j0)
                    + (1.0 - fx) * fy * node(i0, j0 + 1)
                    + fx * fy * node(i0 + 1, j0 + 1);
            }
        }
        Ok(dealias(&forward_values(&self.grid, &out)).with_mean_removed())
    }
}

/// Maps node coordinates to collocation indices.
fn node_index(grid: &GridSpec, (x, y): (f64, f64)) -> Result<(usize, usize)> {
    let n = grid.n() as f64;
    let fx = x / grid.dx();
    let fy = (y + 0.5 * grid.length()) / grid.dx();
    let (ix, iy) = (fx.round(), fy.round());
    let tol = 1e-9;
    if (fx - ix).abs() > tol || (fy - iy).abs() > tol || ix < 0.0 || iy < 0.0 || ix >= n || iy >= n {
        return Err(Error::domain(format!("node ({x}, {y}) is not a collocation point")));
    }
    Ok((ix as usize, iy as usize))
}

/// `η(u) = max_i |u(x_i)|` over the given nodes.
pub fn eta(u: &PhysicalField, nodes: &[(f64, f64)]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for &p in nodes {
        let (ix, iy) = node_index(u.grid(), p)?;
        best = best.max(u.at(ix, iy).abs());
    }
    Ok(best)
}

/// `η` of a vector field: the largest Euclidean norm at a node.
pub fn eta_vector(u: (&PhysicalField, &PhysicalField), nodes: &[(f64, f64)]) -> Result<f64> {
    u.0.grid().check_same(u.1.grid())?;
    let mut best: f64 = 0.0;
    for &p in nodes {
        let (ix, iy) = node_index(u.0.grid(), p)?;
        best = best.max(u.0.at(ix, iy).hypot(u.1.at(ix, iy)));
    }
    Ok(best)
}

/// `η(∇ Δ^{-1} w)`.
pub fn eta_grad_psi(w: &SpectralField, nodes: &[(f64, f64)]) -> Result<f64> {
    let psi = inv_laplacian(w)?;
    let gx = differentiate(&psi, Derivative::Dx)?.inverse();
    let gy = differentiate(&psi, Derivative::Dy)?.inverse();
    eta_vector((&gx, &gy), nodes)
}

/// Nodal synchronization experiment: the slave is nudged by
/// `λ I_N(ω - ω♯)` with `I_N` the bilinear node interpolant.
pub fn run_nodes_sync(
    cfg: &NodesSyncConfig,
    forcing: &SpectralField,
    params: &PhysicalParams,
    integrator: &IntegratorConfig,
) -> Result<SyncResult> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::domain(format!("nudging gain must be nonnegative, got {}", cfg.lambda)));
    }
    let lattice = NodeLattice::new(forcing.grid(), cfg.nodes)?;
    let points = lattice.points();
    let lambda = cfg.lambda;
    run_pair(
        &cfg.common,
        forcing,
        params,
        integrator,
        |m, s, h| {
            let d = (m - s).inverse();
            *s = s.axpy(lambda * h, &lattice.interpolate(&d)?)?;
            Ok(())
        },
        |m, s| eta_grad_psi(&(m - s), &points),
    )
}

/// Ratios of the two sides of the nodal inequalities with `c_η = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodalRatios {
    /// `|u|² / (L² η² + L⁴/N² |Δu|²)`
    pub l2: f64,
    /// `|∇u|² / (N η² + L²/N |Δu|²)`
    pub grad: f64,
    /// `|u|_∞² / (N η² + L²/N |Δu|²)`, sup over collocation points.
    pub sup: f64,
}

impl NodalRatios {
    /// Combined H¹-type estimate, the larger of the gradient and sup ratios.
    pub fn h1(&self) -> f64 {
        self.grad.max(self.sup)
    }
}

/// Nodal inequality ratios for one field; `None` for the zero field.
pub fn nodal_ratios(u: &SpectralField, lattice: &NodeLattice) -> Result<Option<NodalRatios>> {
    let grid = lattice.grid();
    grid.check_same(u.grid())?;
    let phys = u.inverse();
    let e = eta(&phys, &lattice.points())?;
    let lap = hs_norm(u, 2.0)?;
    let n_nodes = lattice.len() as f64;
    let l = grid.length();
    let first = l * l * e * e + l.powi(4) / (n_nodes * n_nodes) * lap * lap;
    let second = n_nodes * e * e + l * l / n_nodes * lap * lap;
    if first == 0.0 || second == 0.0 {
        return Ok(None);
    }
    let sup = phys.max_abs();
    Ok(Some(NodalRatios {
        l2: l2_norm(u).powi(2) / first,
        grad: hs_norm(u, 1.0)?.powi(2) / second,
        sup: sup * sup / second,
    }))
}

/// Empirical `c_η` estimates: maxima of the nodal ratios over `trials`
/// random fields drawn from `profile`.
pub fn nodal_inequality_check(
    lattice: &NodeLattice,
    profile: &SpectrumProfile,
    trials: usize,
    seed: u64,
) -> Result<NodalRatios> {
    let mut best = NodalRatios::default();
    for k in 0..trials {
        let u = random_field(seed.wrapping_add(k as u64), profile, lattice.grid(), false);
        if let Some(r) = nodal_ratios(&u, lattice)? {
            best.l2 = best.l2.max(r.l2);
            best.grad = best.grad.max(r.grad);
            best.sup = best.sup.max(r.sup);
        }
    }
    Ok(best)
}

/// Outcome of an empirical threshold search.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    /// Smallest swept value whose run converged, with its neighbours checked.
    Threshold { value: f64, table: Vec<SweepEntry> },
    /// The uncoupled control converged: contraction is due to dissipation.
    TooDissipative { control: SweepEntry },
    /// Verdicts were not monotone across the bracket, or nothing converged.
    Inconclusive { reason: String, table: Vec<SweepEntry> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub verdict: Verdict,
    pub ratio: f64,
}

/// Bisection over a sorted sweep of coupling strengths. `run(v)` performs
/// one experiment; `control` is the uncoupled value (κ = 0 or λ = 0).
pub fn threshold_search(
    values: &[f64],
    control: f64,
    mut run: impl FnMut(f64) -> Result<SyncResult>,
) -> Result<SearchOutcome> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let mut cache: BTreeMap<usize, SweepEntry> = BTreeMap::new();
    let entry = |v: f64, r: &SyncResult| SweepEntry { value: v, verdict: r.verdict, ratio: r.ratio };

    let ctrl = run(control)?;
    let ctrl_entry = entry(control, &ctrl);
    if ctrl.verdict == Verdict::Converged {
        return Ok(SearchOutcome::TooDissipative { control: ctrl_entry });
    }
    if sorted.is_empty() {
        return Ok(SearchOutcome::Inconclusive { reason: "empty sweep".into(), table: vec![ctrl_entry] });
    }
    let mut eval = |i: usize, cache: &mut BTreeMap<usize, SweepEntry>| -> Result<Verdict> {
        if let Some(e) = cache.get(&i) {
            return Ok(e.verdict);
        }
        let r = run(sorted[i])?;
        let e = entry(sorted[i], &r);
        cache.insert(i, e);
        Ok(e.verdict)
    };
    let table = |cache: &BTreeMap<usize, SweepEntry>| {
        let mut t = vec![ctrl_entry];
        t.extend(cache.values().copied());
        t
    };
    let top = sorted.len() - 1;
    if eval(top, &mut cache)? != Verdict::Converged {
        return Ok(SearchOutcome::Inconclusive { reason: "no swept value converged".into(), table: table(&cache) });
    }
    // invariant: index lo (or the control when lo is None) fails, hi converges
    let mut lo: Option<usize> = None;
    let mut hi = top;
    loop {
        let start = lo.map_or(0, |l| l + 1);
        if start >= hi {
            break;
        }
        let mid = start + (hi - start) / 2;
        if eval(mid, &mut cache)? == Verdict::Converged {
            hi = mid;
        } else {
            lo = Some(mid);
        }
    }
    if hi > 0 && eval(hi - 1, &mut cache)? == Verdict::Converged {
        return Ok(SearchOutcome::Inconclusive { reason: "lower neighbour also converged".into(), table: table(&cache) });
    }
    if hi < top && eval(hi + 1, &mut cache)? != Verdict::Converged {
        return Ok(SearchOutcome::Inconclusive {
            reason: "upper neighbour did not converge".into(),
            table: table(&cache),
        });
    }
    Ok(SearchOutcome::Threshold { value: sorted[hi], table: table(&cache) })
}

/// One row of the zonalization sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZonalizationRow {
    pub epsilon: f64,
    /// `sup_t |ω̃(t)|²` over `[burn_in, T]`.
    pub sup_nonzonal: f64,
    /// `sup_t μ ∫_t^{t+1} |∇ω̃|²` over windows inside `[burn_in, T]`.
    pub sup_window_dissipation: f64,
    /// `sup_t (|ω̃(t)|² + μ ∫_t^{t+1} |∇ω̃|²)`.
    pub sup_combined: f64,
    /// `ε M0 / κ0²` with the current constants.
    pub bound: f64,
    /// `sup_combined / bound`.
    pub ratio: f64,
}

/// Runs the forced flow for each `ε` and reports the non-zonal quantities
/// controlled by the zonalization bound.
#[allow(clippy::too_many_arguments)]
pub fn zonalization_check(
    forcing: &SpectralField,
    params: &PhysicalParams,
    eps_list: &[f64],
    t_end: f64,
    burn_in: f64,
    initial: &SpectralField,
    integrator: &IntegratorConfig,
    consts: &Constants,
) -> Result<Vec<ZonalizationRow>> {
    if !(t_end - burn_in >= 20.0 / params.nu0()) {
        return Err(Error::domain(format!(
            "T - burn_in = {} must be at least 20/nu0 = {}",
            t_end - burn_in,
            20.0 / params.nu0()
        )));
    }
    let gs = grashof_set(forcing, params)?;
    let m = m0(&gs, consts);
    eps_list
        .par_iter()
        .map(|&eps| {
            let p = params.with_epsilon(eps)?;
            let mut stepper = Stepper::new(forcing, &p, integrator)?;
            let mut st = SimState::new(0.0, initial.clone());
            let mut samples: Vec<(f64, f64, f64)> = Vec::new(); // (t, |ω̃|², |∇ω̃|²)
            let push = |st: &SimState, samples: &mut Vec<(f64, f64, f64)>| -> Result<()> {
                let (_, tilde) = zonal_split(&st.omega);
                samples.push((st.t, l2_norm(&tilde).powi(2), hs_norm(&tilde, 1.0)?.powi(2)));
                Ok(())
            };
            let mut clock = Clock::new(0.0, t_end, vec![t_end])?;
            let mut dt = stepper.suggest_dt(&[&st.omega])?;
            while let Some((h, t_new)) = clock.step_from(st.t, dt) {
                st = stepper.advance(&st, h)?;
                st.t = t_new;
                if st.t >= burn_in - 1.0 {
                    push(&st, &mut samples)?;
                }
                clock.due(st.t);
                if st.steps.is_multiple_of(DT_REFRESH) {
                    dt = stepper.suggest_dt(&[&st.omega])?;
                }
            }
            let mu = p.mu;
            // cumulative trapezoid of |∇ω̃|²
            let mut cum = vec![0.0; samples.len()];
            for i in 1..samples.len() {
                cum[i] = cum[i - 1] + 0.5 * (samples[i].0 - samples[i - 1].0) * (samples[i].2 + samples[i - 1].2);
            }
            let at = |t: f64| -> f64 {
                let j = samples.partition_point(|s| s.0 < t);
                if j == 0 {
                    return cum[0];
                }
                if j >= samples.len() {
                    return cum[samples.len() - 1];
                }
                let (t0, t1) = (samples[j - 1].0, samples[j].0);
                let w = (t - t0) / (t1 - t0);
                cum[j - 1] + w * (cum[j] - cum[j - 1])
            };
            let mut row = ZonalizationRow { epsilon: eps, bound: eps * m / (p.kappa0 * p.kappa0), ..Default::default() };
            for &(t, nz, _) in samples.iter().filter(|s| s.0 >= burn_in) {
                row.sup_nonzonal = row.sup_nonzonal.max(nz);
                let window = if t + 1.0 <= t_end { mu * (at(t + 1.0) - at(t)) } else { 0.0 };
                row.sup_window_dissipation = row.sup_window_dissipation.max(window);
                row.sup_combined = row.sup_combined.max(nz + window);
            }
            row.ratio = if row.bound > 0.0 { row.sup_combined / row.bound } else { f64::INFINITY };
            Ok(row)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaConsistency {
    /// Max over ticks of `|δω_direct - (ω - ω♯)| / |ω - ω♯|` (absolute
    /// when `|ω - ω♯| < 1e-14`).
    pub max_residual: f64,
    /// Eddy turnover time `L / U_rms` of the initial master state.
    pub turnover: f64,
    pub ticks: usize,
}

/// Integrates `(ω, ω♯, δω)` together, `δω` through its own equation
/// `∂t δω + ∂(ψ♯, δω) + ∂(δψ, ω) + (κ0/ε) ∂x δψ = μ Δδω`, and compares it
/// with `ω - ω♯` at every tick.
pub fn delta_consistency(
    master: &SpectralField,
    slave: &SpectralField,
    forcing: &SpectralField,
    params: &PhysicalParams,
    integrator: &IntegratorConfig,
    t_end: f64,
    cadence: f64,
) -> Result<DeltaConsistency> {
    let grid = forcing.grid();
    let stepper = Stepper::new(forcing, params, integrator)?;
    let mut prop = Propagator::new(grid, params);
    let turnover = eddy_turnover(master).unwrap_or(f64::INFINITY);
    let master = master.clone().with_mean_removed();
    let slave = slave.clone().with_mean_removed();
    let delta = &master - &slave;
    let mut u = vec![master, slave, delta];
    let dealiased = integrator.dealias;
    let residual = |u: &[SpectralField]| {
        let pair = &u[0] - &u[1];
        let diff = l2_norm(&(&u[2] - &pair));
        let scale = l2_norm(&pair);
        if scale < 1e-14 {
            diff
        } else {
            diff / scale
        }
    };
    let mut worst = residual(&u);
    let mut ticks = 1;
    let mut clock = Clock::new(0.0, t_end, vec![cadence])?;
    let mut t = 0.0;
    let mut steps = 0u64;
    let mut dt = stepper.suggest_dt(&[&u[0], &u[1]])?;
    while let Some((h, t_new)) = clock.step_from(t, dt) {
        u = prop.if_rk4(&u, h, |v| {
            let psi_m = inv_laplacian(&v[0])?;
            let psi_s = inv_laplacian(&v[1])?;
            let psi_d = inv_laplacian(&v[2])?;
            let nm = jacobian_with(&psi_m, &v[0], dealiased)?;
            let ns = jacobian_with(&psi_s, &v[1], dealiased)?;
            let a = jacobian_with(&psi_s, &v[2], dealiased)?;
            let b = jacobian_with(&psi_d, &v[0], dealiased)?;
            let f = forcing;
            Ok(vec![f - &nm, f - &ns, -&(&a + &b)])
        })?;
        steps += 1;
        t = t_new;
        for (w, name) in u.iter_mut().zip(["master", "slave", "difference"]) {
            w.pin_mean();
            if integrator.enforce_symmetry {
                *w = crate::calculus::enforce_y_antisymmetry(w);
            }
            check_finite(w, steps, t).map_err(label(name))?;
        }
        let due = !clock.due(t).is_empty();
        if due {
            worst = worst.max(residual(&u));
            ticks += 1;
        }
        if due || steps.is_multiple_of(DT_REFRESH) {
            dt = stepper.suggest_dt(&[&u[0], &u[1]])?;
        }
    }
    Ok(DeltaConsistency { max_residual: worst, turnover, ticks })
}
