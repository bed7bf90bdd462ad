//! Grashof numbers, `M0`, and the determining-mode and determining-node
//! thresholds for the three zonal forcing classes.
//!
//! The ν0-dependent prefactors `c4(ν0) .. c9(ν0)` are written as explicit
//! powers of ν0 times the constants in [`Constants`]:
//!
//! | family | ε term                     | zonal term                                           |
//! |--------|----------------------------|------------------------------------------------------|
//! | modes  | `ν0^{-3/4} (εM0)^{1/4}`    | `ν0^{-1/8} (κf/κ0)^{3/8} G0^{1/4}`                   |
//! | nodes  | `ν0^{-3/2} (εM0)^{1/2}`    | `ν0^{-1/3} (κf/κ0)^{1/3} G0^{2/3}`                   |
//!
//! with `κf` balanced per class; the algebraic nodes bound is the closed
//! form `(c_ζ ν0^{-1} G0^{4s+5})^{1/(6s+5)}`.

use serde::{Deserialize, Serialize};

use crate::calculus::hs_norm;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::forcing::{zeta, ZonalClass};
use crate::params::PhysicalParams;

/// Dimensionless constants left open by the theory; all default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c_star: f64,
    pub c_alpha: f64,
    pub c_eta: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            c: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c7: 1.0,
            c8: 1.0,
            c9: 1.0,
            c_star: 1.0,
            c_alpha: 1.0,
            c_eta: 1.0,
        }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("c", self.c),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c6", self.c6),
            ("c7", self.c7),
            ("c8", self.c8),
            ("c9", self.c9),
            ("c_star", self.c_star),
            ("c_alpha", self.c_alpha),
            ("c_eta", self.c_eta),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("constant {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrashofSet {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl GrashofSet {
    pub fn validate(&self) -> Result<()> {
        for v in [self.g0, self.g1, self.g2, self.g3] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("Grashof numbers must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// `G_m = |∇^m f_v| / (μκ0)^{2-m}` computed from the vorticity forcing
/// `f = ∇^⊥·f_v`, using `|∇^m f_v| = |∇^{m-1} f|` for mean-zero fields.
pub fn grashof(m: u32, f: &SpectralField, params: &PhysicalParams) -> Result<f64> {
    if m > 3 {
        return Err(Error::domain(format!("Grashof index must be 0..=3, got {m}")));
    }
    let norm = hs_norm(f, m as f64 - 1.0)?;
    Ok(norm / (params.mu * params.kappa0).powi(2 - m as i32))
}

/// `G_m` from the two components of a velocity forcing.
pub fn grashof_velocity(m: u32, fv: (&SpectralField, &SpectralField), params: &PhysicalParams) -> Result<f64> {
    if m > 3 {
        return Err(Error::domain(format!("Grashof index must be 0..=3, got {m}")));
    }
    let a = hs_norm(fv.0, m as f64)?;
    let b = hs_norm(fv.1, m as f64)?;
    Ok((a * a + b * b).sqrt() / (params.mu * params.kappa0).powi(2 - m as i32))
}

pub fn grashof_set(f: &SpectralField, params: &PhysicalParams) -> Result<GrashofSet> {
    Ok(GrashofSet {
        g0: grashof(0, f, params)?,
        g1: grashof(1, f, params)?,
        g2: grashof(2, f, params)?,
        g3: grashof(3, f, params)?,
    })
}

/// `M0 = c3 G2 G3 (1 + G0²)`.
pub fn m0(gs: &GrashofSet, consts: &Constants) -> f64 {
    consts.c3 * gs.g2 * gs.g3 * (1.0 + gs.g0 * gs.g0)
}

/// Non-rotating thresholds `(c1 G0^{1/2}, c2 G0)` for `κ/κ0` and `N`.
pub fn classical_thresholds(g0: f64, consts: &Constants) -> (f64, f64) {
    (consts.c1 * g0.sqrt(), consts.c2 * g0)
}

/// `c_ζ(s) = 1 / ((2s + 1) ζ(2s + 2))`.
pub fn c_zeta(s: f64) -> Result<f64> {
    if !(s > 2.5) {
        return Err(Error::domain(format!("s must exceed 5/2, got {s}")));
    }
    Ok(1.0 / ((2.0 * s + 1.0) * zeta(2.0 * s + 2.0)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Modes,
    Nodes,
}

impl Family {
    /// Exponent `p` of `F_α^{-1}(y) = y^p e^{2α(y-1)} / c_α`.
    pub fn f_alpha_power(self) -> f64 {
        match self {
            Family::Modes => 2.5,
            Family::Nodes => 2.0 / 3.0,
        }
    }
}

/// `y^p e^{2α(y-1)} / c_α`.
pub fn f_alpha_forward(y: f64, alpha: f64, c_alpha: f64, family: Family) -> f64 {
    y.powf(family.f_alpha_power()) * (2.0 * alpha * (y - 1.0)).exp() / c_alpha
}

/// Inverse of [`f_alpha_forward`] on `y > 0`.
///
/// Works with `g(y) = p ln y + 2α(y - 1) - ln(c_α u)`, which is increasing
/// and concave, so Newton from the right converges monotonically; each
/// iterate is kept inside a bisection bracket.
pub fn f_alpha(u: f64, alpha: f64, c_alpha: f64, family: Family) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::domain(format!("F_alpha requires u > 0, got {u}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(c_alpha > 0.0) {
        return Err(Error::domain(format!("c_alpha must be positive, got {c_alpha}")));
    }
    let p = family.f_alpha_power();
    let target = (c_alpha * u).ln();
    let g = |y: f64| p * y.ln() + 2.0 * alpha * (y - 1.0) - target;
    let dg = |y: f64| p / y + 2.0 * alpha;

    let uc = u * c_alpha;
    let mut lo = uc.min(1.0);
    let mut hi = 1f64.max(1.0 + (1.0 + uc).ln() / (2.0 * alpha) + u.powf(1.0 / p));
    while g(lo) > 0.0 {
        lo *= 0.5;
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut y = hi;
    for _ in 0..200 {
        let gy = g(y);
        if gy.abs() <= 1e-15 * (1.0 + target.abs()) {
            break;
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let newton = y - gy / dg(y);
        y = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(y)
}

/// Zonal forcing class as seen by the threshold formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdCase {
    BandLimited { kappa_f_over_kappa0: f64 },
    Algebraic { s: f64 },
    Analytic { alpha: f64 },
}

impl ThresholdCase {
    pub fn from_class(class: &ZonalClass, kappa0: f64) -> Self {
        match *class {
            ZonalClass::BandLimited { kappa_f } => ThresholdCase::BandLimited { kappa_f_over_kappa0: kappa_f / kappa0 },
            ZonalClass::Algebraic { s } => ThresholdCase::Algebraic { s },
            ZonalClass::Analytic { alpha } => ThresholdCase::Analytic { alpha },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdCase::BandLimited { kappa_f_over_kappa0 } if !(kappa_f_over_kappa0 >= 1.0) => Err(
                Error::domain(format!("kappa_f / kappa0 must be at least 1, got {kappa_f_over_kappa0}")),
            ),
            ThresholdCase::Algebraic { s } if !(s > 2.5) => Err(Error::domain(format!("s must exceed 5/2, got {s}"))),
            ThresholdCase::Analytic { alpha } if !(alpha > 0.0) => {
                Err(Error::domain(format!("alpha must be positive, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

/// Inputs shared by every threshold evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdInputs {
    pub case: ThresholdCase,
    pub epsilon: f64,
    pub nu0: f64,
    pub grashof: GrashofSet,
}

impl ThresholdInputs {
    fn validate(&self, consts: &Constants) -> Result<()> {
        self.case.validate()?;
        self.grashof.validate()?;
        consts.validate()?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return Err(Error::domain(format!("nu0 must be positive, got {}", self.nu0)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub family: Family,
    pub inputs: ThresholdInputs,
    pub m0: f64,
    /// Contribution of the non-zonal forcing, through `εM0`.
    pub epsilon_term: f64,
    /// Contribution of the zonal forcing.
    pub zonal_term: f64,
    /// Lower bound on `κ/κ0` (modes family only).
    pub kappa_over_kappa0: Option<f64>,
    /// Lower bound on the node count (nodes family only).
    pub n_nodes: Option<f64>,
    /// Supplied or balanced `κ_f/κ0`.
    pub kappa_f_over_kappa0: f64,
    /// Whether the ε-smallness assumption behind the formula holds.
    pub epsilon_valid: bool,
    /// `ε M0` and the right-hand side it is compared against.
    pub epsilon_m0: f64,
    pub epsilon_limit: f64,
    pub classical_kappa: f64,
    pub classical_n: f64,
    /// The ν0 powers used for the two terms.
    pub nu0_dependence: String,
}

impl ThresholdReport {
    /// The threshold value: `κ/κ0` or `N`.
    pub fn value(&self) -> f64 {
        self.kappa_over_kappa0.or(self.n_nodes).unwrap_or(0.0)
    }
}

/// Balanced algebraic `κ_f/κ0` from `(κf/κ0)^{2s+7/2} = c c_ζ(s) ν0^{-1/2} G0`.
pub fn algebraic_kappa_f_modes(s: f64, nu0: f64, g0: f64, consts: &Constants) -> Result<f64> {
    let rhs = consts.c * c_zeta(s)? * nu0.powf(-0.5) * g0;
    Ok(rhs.powf(1.0 / (2.0 * s + 3.5)))
}

/// Balanced algebraic `κ_f/κ0` from `(κf/κ0)^{2s+5/3} = c c_ζ(s) ν0^{-1} G0^{2/3}`.
pub fn algebraic_kappa_f_nodes(s: f64, nu0: f64, g0: f64, consts: &Constants) -> Result<f64> {
    let rhs = consts.c * c_zeta(s)? / nu0 * g0.powf(2.0 / 3.0);
    Ok(rhs.powf(1.0 / (2.0 * s + 5.0 / 3.0)))
}

/// Lower bound on `κ/κ0` for the low modes to be determining.
pub fn modes_threshold(inputs: &ThresholdInputs, consts: &Constants) -> Result<ThresholdReport> {
    inputs.validate(consts)?;
    let ThresholdInputs { case, epsilon, nu0, grashof: gs } = *inputs;
    let g0 = gs.g0;
    let m = m0(&gs, consts);
    let em = epsilon * m;
    let eps_core = nu0.powf(-0.75) * em.powf(0.25);
    let zonal_core = |kf: f64| nu0.powf(-0.125) * kf.powf(0.375) * g0.powf(0.25);
    let (ci, kf, limit, dependence) = match case {
        ThresholdCase::BandLimited { kappa_f_over_kappa0: kf } => {
            (consts.c4, kf, consts.c * nu0 * nu0 * kf, "epsilon term nu0^(-3/4); zonal term nu0^(-1/8)".to_string())
        }
        ThresholdCase::Algebraic { s } => {
            let kf = algebraic_kappa_f_modes(s, nu0, g0, consts)?;
            let q = 4.0 * s + 7.0;
            let limit = consts.c * c_zeta(s)?.powf(2.0 / q) * nu0.powf(2.0 - 1.0 / q) * g0.powf(2.0 / q);
            let dependence = format!(
                "epsilon term nu0^(-3/4); zonal term nu0^(-(s+5/2)/(8s+14)) = nu0^({:.6})",
                -(s + 2.5) / (8.0 * s + 14.0)
            );
            (consts.c5, kf, limit, dependence)
        }
        ThresholdCase::Analytic { alpha } => {
            let kf = if g0 > 0.0 { f_alpha(g0 / nu0.sqrt(), alpha, consts.c_alpha, Family::Modes)? } else { 0.0 };
            (
                consts.c6,
                kf,
                consts.c * nu0 * nu0 * kf,
                "epsilon term nu0^(-3/4); zonal term nu0^(-1/8) with kappa_f = F_alpha(G0 nu0^(-1/2))".to_string(),
            )
        }
    };
    let epsilon_term = ci * eps_core;
    let zonal_term = ci * zonal_core(kf);
    let (ck, cn) = classical_thresholds(g0, consts);
    Ok(ThresholdReport {
        family: Family::Modes,
        inputs: *inputs,
        m0: m,
        epsilon_term,
        zonal_term,
        kappa_over_kappa0: Some(epsilon_term.max(zonal_term)),
        n_nodes: None,
        kappa_f_over_kappa0: kf,
        epsilon_valid: em <= limit,
        epsilon_m0: em,
        epsilon_limit: limit,
        classical_kappa: ck,
        classical_n: cn,
        nu0_dependence: dependence,
    })
}

/// Lower bound on the number of regularly spaced determining nodes.
pub fn nodes_threshold(inputs: &ThresholdInputs, consts: &Constants) -> Result<ThresholdReport> {
    inputs.validate(consts)?;
    let ThresholdInputs { case, epsilon, nu0, grashof: gs } = *inputs;
    let g0 = gs.g0;
    let m = m0(&gs, consts);
    let em = epsilon * m;
    let eps_core = nu0.powf(-1.5) * em.sqrt();
    let zonal_core = |kf: f64| nu0.powf(-1.0 / 3.0) * kf.cbrt() * g0.powf(2.0 / 3.0);
    let (ci, kf, zonal, dependence) = match case {
        ThresholdCase::BandLimited { kappa_f_over_kappa0: kf } => {
            (consts.c7, kf, zonal_core(kf), "epsilon term nu0^(-3/2); zonal term nu0^(-1/3)".to_string())
        }
        ThresholdCase::Algebraic { s } => {
            let kf = algebraic_kappa_f_nodes(s, nu0, g0, consts)?;
            let zonal = (c_zeta(s)? / nu0 * g0.powf(4.0 * s + 5.0)).powf(1.0 / (6.0 * s + 5.0));
            let dependence = format!(
                "epsilon term nu0^(-3/2); zonal term nu0^(-1/(6s+5)) = nu0^({:.6})",
                -1.0 / (6.0 * s + 5.0)
            );
            (consts.c8, kf, zonal, dependence)
        }
        ThresholdCase::Analytic { alpha } => {
            let kf = if g0 > 0.0 {
                f_alpha(g0.powf(2.0 / 3.0) / nu0, alpha, consts.c_alpha, Family::Nodes)?
            } else {
                0.0
            };
            (
                consts.c9,
                kf,
                zonal_core(kf),
                "epsilon term nu0^(-3/2); zonal term nu0^(-1/3) with kappa_f = F_alpha(G0^(2/3) / nu0)".to_string(),
            )
        }
    };
    let epsilon_term = ci * eps_core;
    let zonal_term = ci * zonal;
    let limit = consts.c * nu0 * nu0;
    let (ck, cn) = classical_thresholds(g0, consts);
    Ok(ThresholdReport {
        family: Family::Nodes,
        inputs: *inputs,
        m0: m,
        epsilon_term,
        zonal_term,
        kappa_over_kappa0: None,
        n_nodes: Some(epsilon_term.max(zonal_term)),
        kappa_f_over_kappa0: kf,
        epsilon_valid: em <= limit,
        epsilon_m0: em,
        epsilon_limit: limit,
        classical_kappa: ck,
        classical_n: cn,
        nu0_dependence: dependence,
    })
}
