//! Integrating-factor RK4 time stepping, observers and diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    differentiate, dealias, enforce_y_antisymmetry, hs_norm, inner_product, inv_laplacian, jacobian_with,
    project_high, zonal_split, Derivative,
};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::params::PhysicalParams;

/// Per-mode linear symbol `-μ|k|² + i (κ0/ε) k_x / |k|²` acting on `ω̂`.
pub fn linear_symbol(k: (f64, f64), params: &PhysicalParams) -> Result<Complex64> {
    let k2 = k.0 * k.0 + k.1 * k.1;
    if k2 == 0.0 {
        return Err(Error::domain("linear symbol at k = 0"));
    }
    Ok(Complex64::new(-params.mu * k2, params.beta() * k.0 / k2))
}

/// Symbols on the whole grid; zero at `k = 0`, and the β part is dropped
/// on the x-Nyquist column, whose modes are their own conjugates.
pub fn symbol_table(grid: &GridSpec, params: &PhysicalParams) -> Vec<Complex64> {
    let n = grid.n();
    (0..grid.len())
        .map(|idx| {
            if idx == 0 {
                return Complex64::default();
            }
            let s = linear_symbol(grid.wavevector(idx), params).expect("nonzero wavevector");
            if grid.is_nyquist(idx % n) {
                Complex64::new(s.re, 0.0)
            } else {
                s
            }
        })
        .collect()
}

/// Largest Rossby frequency `max |Im symbol|` on the grid.
pub fn max_rossby_frequency(grid: &GridSpec, params: &PhysicalParams) -> f64 {
    symbol_table(grid, params).iter().map(|s| s.im.abs()).fold(0.0, f64::max)
}

/// Steps between adaptive time-step updates.
pub const DT_REFRESH: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Time step; with `adaptive` it is the upper bound.
    pub dt: f64,
    /// Recompute `dt = min(dt, 0.5 / max|Im symbol|, cfl Δx / max|v|)` at
    /// every observer tick and every [`DT_REFRESH`] steps.
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub enforce_symmetry: bool,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

impl IntegratorConfig {
    pub fn fixed(dt: f64) -> Self {
        IntegratorConfig { dt, adaptive: false, cfl: 0.5, enforce_symmetry: false, dealias: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::domain(format!("cfl must be positive, got {}", self.cfl)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub omega: SpectralField,
    /// Number of steps taken since the initial condition.
    pub steps: u64,
}

impl SimState {
    pub fn new(t: f64, omega: SpectralField) -> Self {
        SimState { t, omega: omega.with_mean_removed(), steps: 0 }
    }
}

/// `e^{symbol h}` and `e^{symbol h/2}` for the last step size used.
#[derive(Clone, Debug)]
pub(crate) struct Propagator {
    symbol: Vec<Complex64>,
    h: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Propagator {
    pub(crate) fn new(grid: &GridSpec, params: &PhysicalParams) -> Self {
        Propagator { symbol: symbol_table(grid, params), h: f64::NAN, half: Vec::new(), full: Vec::new() }
    }

    fn prepare(&mut self, h: f64) {
        if self.h == h {
            return;
        }
        self.half = self.symbol.iter().map(|s| (s * (0.5 * h)).exp()).collect();
        self.full = self.symbol.iter().map(|s| (s * h).exp()).collect();
        self.h = h;
    }

    /// One Lawson IF-RK4 step of `u' = L u + N(u)` for a tuple of fields
    /// sharing the linear operator `L`.
    pub(crate) fn if_rk4<F>(&mut self, u: &[SpectralField], h: f64, mut nl: F) -> Result<Vec<SpectralField>>
    where
        F: FnMut(&[SpectralField]) -> Result<Vec<SpectralField>>,
    {
        self.prepare(h);
        let half = &self.half;
        let full = &self.full;
        let mul = |e: &[Complex64], f: &SpectralField| f.map_modes(|i, c| e[i] * c);
        let a = nl(u)?;
        let u2: Vec<_> = u.iter().zip(&a).map(|(x, ax)| mul(half, &x.zip_with(ax, |p, q| p + q * (0.5 * h)))).collect();
        let b = nl(&u2)?;
        let eh_u: Vec<_> = u.iter().map(|x| mul(half, x)).collect();
        let u3: Vec<_> = eh_u.iter().zip(&b).map(|(x, bx)| x.zip_with(bx, |p, q| p + q * (0.5 * h))).collect();
        let c = nl(&u3)?;
        let e_u: Vec<_> = u.iter().map(|x| mul(full, x)).collect();
        let u4: Vec<_> = e_u.iter().zip(&c).map(|(x, cx)| x.zip_with(&mul(half, cx), |p, q| p + q * h)).collect();
        let d = nl(&u4)?;
        let mut out = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let ea = mul(full, &a[i]);
            let ehbc = mul(half, &b[i].zip_with(&c[i], |p, q| p + q));
            let incr = ea.zip_with(&ehbc, |p, q| p + 2.0 * q).zip_with(&d[i], |p, q| p + q);
            out.push(e_u[i].zip_with(&incr, |p, q| p + q * (h / 6.0)));
        }
        Ok(out)
    }
}

/// Reusable stepper for one trajectory of the vorticity equation.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: PhysicalParams,
    forcing: SpectralField,
    cfg: IntegratorConfig,
    prop: Propagator,
    rossby_max: f64,
    warned: bool,
}

impl Stepper {
    pub fn new(forcing: &SpectralField, params: &PhysicalParams, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = forcing.grid();
        if (grid.kappa0() - params.kappa0).abs() > 1e-12 * params.kappa0 {
            return Err(Error::dimension("kappa0 of params does not match the grid"));
        }
        if forcing.coeffs()[0] != Complex64::default() {
            return Err(Error::domain("forcing must have zero mean"));
        }
        Ok(Stepper {
            params: *params,
            forcing: forcing.clone(),
            cfg: *cfg,
            prop: Propagator::new(grid, params),
            rossby_max: max_rossby_frequency(grid, params),
            warned: false,
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// `N(ω) = -∂(Δ^{-1}ω, ω) + f`.
    pub fn nonlinear(&self, omega: &SpectralField) -> Result<SpectralField> {
        nonlinear_term(omega, &self.forcing, self.cfg.dealias)
    }

    /// Step size for the next stretch of integration.
    pub fn suggest_dt(&self, omegas: &[&SpectralField]) -> Result<f64> {
        if !self.cfg.adaptive {
            return Ok(self.cfg.dt);
        }
        let mut dt = self.cfg.dt;
        if self.rossby_max > 0.0 {
            dt = dt.min(0.5 / self.rossby_max);
        }
        let grid = self.forcing.grid();
        for w in omegas {
            let vmax = max_velocity(w)?;
            if vmax > 0.0 {
                dt = dt.min(self.cfg.cfl * grid.dx() / vmax);
            }
        }
        Ok(dt)
    }

    pub(crate) fn check_resolution(&mut self, h: f64) {
        if !self.warned && h * self.rossby_max > 0.5 {
            log::warn!(
                "dt * max Rossby frequency = {:.3} exceeds 0.5",
                h * self.rossby_max
            );
            self.warned = true;
        }
    }

    /// Advances `state` by `h`.
    pub fn advance(&mut self, state: &SimState, h: f64) -> Result<SimState> {
        self.check_resolution(h);
        let Stepper { forcing, cfg, prop, .. } = self;
        let mut out = prop
            .if_rk4(std::slice::from_ref(&state.omega), h, |u| Ok(vec![nonlinear_term(&u[0], forcing, cfg.dealias)?]))?
            .pop()
            .expect("one field");
        self.finish(&mut out);
        let steps = state.steps + 1;
        let t = state.t + h;
        check_finite(&out, steps, t)?;
        Ok(SimState { t, omega: out, steps })
    }

    pub(crate) fn finish(&self, omega: &mut SpectralField) {
        omega.pin_mean();
        if self.cfg.enforce_symmetry {
            *omega = enforce_y_antisymmetry(omega);
        }
    }
}

fn nonlinear_term(omega: &SpectralField, forcing: &SpectralField, dealiased: bool) -> Result<SpectralField> {
    let psi = inv_laplacian(omega)?;
    let j = jacobian_with(&psi, omega, dealiased)?;
    Ok(j.zip_with(forcing, |a, f| f - a))
}

pub(crate) fn check_finite(omega: &SpectralField, step: u64, t: f64) -> Result<()> {
    if omega.is_finite() {
        Ok(())
    } else {
        let max_coeff = omega
            .coeffs()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) });
        Err(Error::BlowUp { step, t, max_coeff })
    }
}

/// `max |∇^⊥ ψ|` over the collocation points.
pub fn max_velocity(omega: &SpectralField) -> Result<f64> {
    let psi = inv_laplacian(&omega.clone().with_mean_removed())?;
    let vx = differentiate(&psi, Derivative::Dy)?;
    let vy = differentiate(&psi, Derivative::Dx)?;
    let (a, b) = SpectralField::inverse_pair(&vx, &vy);
    Ok(a.iter().zip(&b).map(|(x, y)| (x * x + y * y).sqrt()).fold(0.0, f64::max))
}

/// Single step of size `cfg.dt`.
pub fn step(
    state: &SimState,
    forcing: &SpectralField,
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
) -> Result<SimState> {
    Stepper::new(forcing, params, cfg)?.advance(state, cfg.dt)
}

/// Callback invoked at `t0` and at every multiple of its cadence.
pub trait Observer {
    fn cadence(&self) -> f64;
    fn observe(&mut self, state: &SimState) -> Result<()>;
}

/// Observer backed by a closure.
pub struct FnObserver<F> {
    cadence: f64,
    f: F,
}

impl<F: FnMut(&SimState) -> Result<()>> FnObserver<F> {
    pub fn new(cadence: f64, f: F) -> Self {
        FnObserver { cadence, f }
    }
}

impl<F: FnMut(&SimState) -> Result<()>> Observer for FnObserver<F> {
    fn cadence(&self) -> f64 {
        self.cadence
    }

    fn observe(&mut self, state: &SimState) -> Result<()> {
        (self.f)(state)
    }
}

/// Step-size bookkeeping shared by single runs and lockstep pairs: steps
/// land exactly on every observer tick `j·cadence` and on `t_end`.
#[derive(Clone, Debug)]
pub(crate) struct Clock {
    cadences: Vec<f64>,
    next: Vec<u64>,
    t_end: f64,
}

impl Clock {
    pub(crate) fn new(t0: f64, t_end: f64, cadences: Vec<f64>) -> Result<Self> {
        if !(t_end >= t0) {
            return Err(Error::domain(format!("end time {t_end} precedes start time {t0}")));
        }
        for &c in &cadences {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::domain(format!("observer cadence must be positive, got {c}")));
            }
        }
        let next = cadences.iter().map(|&c| first_tick_after(t0, c)).collect();
        Ok(Clock { cadences, next, t_end })
    }

    /// Next stop time (tick or end).
    fn next_stop(&self) -> f64 {
        self.cadences
            .iter()
            .zip(&self.next)
            .map(|(&c, &j)| j as f64 * c)
            .fold(self.t_end, f64::min)
    }

    /// Step size and new time for a step from `t` with nominal size `dt`;
    /// `None` once `t_end` is reached.
    pub(crate) fn step_from(&self, t: f64, dt: f64) -> Option<(f64, f64)> {
        if t >= self.t_end {
            return None;
        }
        let stop = self.next_stop();
        let rem = stop - t;
        if rem <= dt * (1.0 + 1e-9) {
            Some((rem, stop))
        } else {
            Some((dt, t + dt))
        }
    }

    /// Indices of the observers due at time `t`; advances their counters.
    pub(crate) fn due(&mut self, t: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, (&c, j)) in self.cadences.iter().zip(self.next.iter_mut()).enumerate() {
            if *j as f64 * c <= t {
                out.push(i);
                *j = first_tick_after(t, c);
            }
        }
        out
    }
}

fn first_tick_after(t: f64, c: f64) -> u64 {
    let mut j = (t / c).floor().max(0.0) as u64;
    while j as f64 * c <= t {
        j += 1;
    }
    j
}

/// Integrates to `t_end`, calling every observer at the start time and at
/// each multiple of its cadence.
pub fn integrate(
    state: &SimState,
    forcing: &SpectralField,
    params: &PhysicalParams,
    cfg: &IntegratorConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<SimState> {
    let mut stepper = Stepper::new(forcing, params, cfg)?;
    run(&mut stepper, state, t_end, observers)
}

/// [`integrate`] with an existing stepper.
pub fn run(
    stepper: &mut Stepper,
    state: &SimState,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<SimState> {
    let mut clock = Clock::new(state.t, t_end, observers.iter().map(|o| o.cadence()).collect())?;
    for o in observers.iter_mut() {
        o.observe(state)?;
    }
    let mut st = state.clone();
    let mut dt = stepper.suggest_dt(&[&st.omega])?;
    while let Some((h, t_new)) = clock.step_from(st.t, dt) {
        st = stepper.advance(&st, h)?;
        st.t = t_new;
        let due = clock.due(st.t);
        let refresh = !due.is_empty() || st.steps.is_multiple_of(DT_REFRESH);
        for i in due {
            observers[i].observe(&st)?;
        }
        if refresh {
            dt = stepper.suggest_dt(&[&st.omega])?;
        }
    }
    Ok(st)
}

/// Quadratic quantities of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    /// `½|∇ψ|²`
    pub energy: f64,
    /// `½|ω|²`
    pub enstrophy: f64,
    /// `½|∇ω|²`
    pub palinstrophy: f64,
    pub zonal_enstrophy: f64,
    pub nonzonal_enstrophy: f64,
    /// `½|ω̄^{>f}|²`, the zonal enstrophy above `κ_f`.
    pub highpass_zonal_enstrophy: f64,
    /// `⟨∂x ψ, ω⟩`, zero up to round-off.
    pub beta_flux: f64,
}

pub fn diagnostics(state: &SimState, kappa_f: f64) -> Result<DiagRecord> {
    let omega = &state.omega;
    let psi = inv_laplacian(omega)?;
    let (wbar, wtilde) = zonal_split(omega);
    let half_sq = |x: f64| 0.5 * x * x;
    Ok(DiagRecord {
        t: state.t,
        energy: half_sq(hs_norm(omega, -1.0)?),
        enstrophy: half_sq(hs_norm(omega, 0.0)?),
        palinstrophy: half_sq(hs_norm(omega, 1.0)?),
        zonal_enstrophy: half_sq(hs_norm(&wbar, 0.0)?),
        nonzonal_enstrophy: half_sq(hs_norm(&wtilde, 0.0)?),
        highpass_zonal_enstrophy: half_sq(hs_norm(&project_high(&wbar, kappa_f), 0.0)?),
        beta_flux: inner_product(&differentiate(&psi, Derivative::Dx)?, omega)?,
    })
}

/// Root-mean-square velocity `(2E/|M|)^{1/2}`.
pub fn rms_velocity(omega: &SpectralField) -> Result<f64> {
    let e = hs_norm(omega, -1.0)?;
    Ok(e / omega.grid().area().sqrt())
}

/// Eddy turnover time `L / U_rms`.
pub fn eddy_turnover(omega: &SpectralField) -> Result<f64> {
    let u = rms_velocity(omega)?;
    if u == 0.0 {
        return Err(Error::domain("eddy turnover time of a motionless state"));
    }
    Ok(omega.grid().length() / u)
}

/// One rectangle-rule update of `I(t) = ∫_0^t u(τ) e^{ν0(τ - t)} dτ`.
pub fn exp_weighted_integral(acc: f64, new_value: f64, dt: f64, nu0: f64) -> f64 {
    acc * (-nu0 * dt).exp() + new_value * dt
}

/// Running exponentially weighted integral with its supremum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpWeightedIntegral {
    pub value: f64,
    pub sup: f64,
}

impl ExpWeightedIntegral {
    pub fn update(&mut self, u: f64, dt: f64, nu0: f64) {
        self.value = exp_weighted_integral(self.value, u, dt, nu0);
        self.sup = self.sup.max(self.value);
    }
}

/// Dealiased `f` with mean removed; used to sanitize initial data.
pub fn prepare_initial(omega: &SpectralField, enforce_symmetry: bool) -> SpectralField {
    let w = dealias(omega).with_mean_removed();
    if enforce_symmetry {
        enforce_y_antisymmetry(&w)
    } else {
        w
    }
}
