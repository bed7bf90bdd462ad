//! Zonal forcing classes (band-limited, algebraic, analytic) plus an
//! optional non-zonal component.
//!
//! The class bounds are stated for coefficients in the orthonormal basis
//! `e^{ik·x}/L`, so a bound `b` on `|f̄_(0,k)|` becomes `b / L` on the
//! coefficients stored by [`SpectralField`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{enforce_y_antisymmetry, hs_norm, zonal_split};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::params::PhysicalParams;
use crate::random::{random_field, SpectrumProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZonalClass {
    /// `f̄ = P_{κ_f} f̄`.
    BandLimited { kappa_f: f64 },
    /// `|f̄_(0,k)| ∝ |k|^{-s}`, `s > 5/2`.
    Algebraic { s: f64 },
    /// `|f̄_(0,k)| ∝ e^{α(1 - |k|/κ0)}`, `α > 0`.
    Analytic { alpha: f64 },
}

impl ZonalClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ZonalClass::BandLimited { kappa_f } if !(kappa_f > 0.0 && kappa_f.is_finite()) => {
                Err(Error::domain(format!("kappa_f must be positive, got {kappa_f}")))
            }
            ZonalClass::Algebraic { s } if !(s > 2.5) => {
                Err(Error::domain(format!("s must exceed 5/2, got {s}")))
            }
            ZonalClass::Analytic { alpha } if !(alpha > 0.0) => {
                Err(Error::domain(format!("alpha must be positive, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ZonalClass::BandLimited { .. } => "band_limited",
            ZonalClass::Algebraic { .. } => "algebraic",
            ZonalClass::Analytic { .. } => "analytic",
        }
    }
}

/// Non-zonal forcing drawn from a spectrum; `grashof` sets
/// `|∇^{-1} f̃| / (μκ0)²` after projection onto y-odd, non-zonal modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonZonalSpec {
    pub profile: SpectrumProfile,
    pub grashof: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ForcingSpecRepr")]
pub struct ForcingSpec {
    #[serde(flatten)]
    pub zonal_class: ZonalClass,
    pub g0: f64,
    /// 0 keeps every sine coefficient positive; other seeds draw random signs.
    #[serde(default)]
    pub phase_seed: u64,
    #[serde(default)]
    pub nonzonal: Option<NonZonalSpec>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ClassTag {
    BandLimited,
    Algebraic,
    Analytic,
}

/// Flat form of [`ForcingSpec`]; `flatten` cannot reject unknown keys.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingSpecRepr {
    class: ClassTag,
    kappa_f: Option<f64>,
    s: Option<f64>,
    alpha: Option<f64>,
    g0: f64,
    #[serde(default)]
    phase_seed: u64,
    #[serde(default)]
    nonzonal: Option<NonZonalSpec>,
}

impl TryFrom<ForcingSpecRepr> for ForcingSpec {
    type Error = String;

    fn try_from(r: ForcingSpecRepr) -> std::result::Result<Self, String> {
        let (key, zonal_class) = match r.class {
            ClassTag::BandLimited => ("kappa_f", r.kappa_f.map(|kappa_f| ZonalClass::BandLimited { kappa_f })),
            ClassTag::Algebraic => ("s", r.s.map(|s| ZonalClass::Algebraic { s })),
            ClassTag::Analytic => ("alpha", r.alpha.map(|alpha| ZonalClass::Analytic { alpha })),
        };
        let zonal_class = zonal_class.ok_or_else(|| format!("missing field `{key}` for this forcing class"))?;
        for (other, v) in [("kappa_f", r.kappa_f), ("s", r.s), ("alpha", r.alpha)] {
            if other != key && v.is_some() {
                return Err(format!("field `{other}` does not apply to this forcing class"));
            }
        }
        Ok(ForcingSpec { zonal_class, g0: r.g0, phase_seed: r.phase_seed, nonzonal: r.nonzonal })
    }
}

impl ForcingSpec {
    pub fn new(zonal_class: ZonalClass, g0: f64) -> Self {
        ForcingSpec { zonal_class, g0, phase_seed: 0, nonzonal: None }
    }

    pub fn with_nonzonal(mut self, profile: SpectrumProfile, grashof: f64, seed: u64) -> Self {
        self.nonzonal = Some(NonZonalSpec { profile, grashof, seed });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.zonal_class.validate()?;
        if !(self.g0 >= 0.0 && self.g0.is_finite()) {
            return Err(Error::domain(format!("g0 must be finite and nonnegative, got {}", self.g0)));
        }
        if let Some(nz) = &self.nonzonal {
            if !(nz.grashof >= 0.0 && nz.grashof.is_finite()) {
                return Err(Error::domain("non-zonal grashof must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Class bound on `|f̄_(0, l κ0)|` in the orthonormal convention, for `l >= 1`.
pub fn class_bound(class: &ZonalClass, g0: f64, params: &PhysicalParams, l: u32) -> Result<f64> {
    class.validate()?;
    let nu0 = params.nu0();
    let k0 = params.kappa0;
    let l = l as f64;
    Ok(match *class {
        ZonalClass::Analytic { alpha } => {
            nu0 * nu0 * g0 / (2.0 * k0) * (2.0 * alpha / (1.0 + 2.0 * alpha)).sqrt() * (alpha * (1.0 - l)).exp()
        }
        ZonalClass::Algebraic { s } => {
            nu0 * nu0 * k0.powf(s - 1.0) * g0 / (2f64.sqrt() * zeta(2.0 + 2.0 * s)?.sqrt()) * (l * k0).powf(-s)
        }
        ZonalClass::BandLimited { kappa_f } => {
            let top = (kappa_f / k0 + 1e-9).floor();
            if top < 1.0 {
                return Err(Error::domain(format!("kappa_f must be at least kappa0, got {kappa_f}")));
            }
            if l > top {
                0.0
            } else {
                let sum: f64 = (1..=top as u32).map(|j| 1.0 / (j as f64 * j as f64)).sum();
                let mu_k0 = params.mu * k0;
                g0 * mu_k0 * mu_k0 * k0 / (2.0 * sum).sqrt()
            }
        }
    })
}

/// Builds the time-independent vorticity forcing: a y-odd sine series in
/// the zonal modes taking each class bound with equality, plus the optional
/// non-zonal part. Modes beyond the dealiasing cutoff are dropped.
pub fn build_forcing(spec: &ForcingSpec, grid: &GridSpec, params: &PhysicalParams) -> Result<SpectralField> {
    spec.validate()?;
    let cutoff = grid.dealias_cutoff() as u32;
    if let ZonalClass::BandLimited { kappa_f } = spec.zonal_class {
        if (kappa_f / params.kappa0 + 1e-9).floor() as u32 > cutoff {
            log::warn!("kappa_f = {kappa_f} exceeds the dealiasing cutoff {cutoff}; the band is truncated");
        }
    }
    let mut signs = ChaCha8Rng::seed_from_u64(spec.phase_seed);
    let mut f = SpectralField::zeros(grid);
    let length = grid.length();
    for l in 1..=cutoff {
        let m = class_bound(&spec.zonal_class, spec.g0, params, l)? / length;
        let sign = if spec.phase_seed == 0 || signs.random::<bool>() { 1.0 } else { -1.0 };
        if m != 0.0 {
            // sin(l κ0 y) has coefficient -i/2 at +l
            f.set_mode(0, l as i64, Complex64::new(0.0, -sign * m));
        }
    }
    if let Some(nz) = &spec.nonzonal {
        let raw = random_field(nz.seed, &nz.profile, grid, true);
        let (_, tilde) = zonal_split(&raw);
        let tilde = enforce_y_antisymmetry(&tilde);
        let g = hs_norm(&tilde, -1.0)? / (params.mu * params.kappa0).powi(2);
        if g > 0.0 {
            f = f.axpy(nz.grashof / g, &tilde)?;
        } else if nz.grashof > 0.0 {
            return Err(Error::domain("non-zonal profile selects no y-odd non-zonal modes"));
        }
    }
    Ok(f.with_mean_removed())
}

/// `|∇^{-1} f̄| / (μ κ0)²` for the zonal part of `f`.
pub fn normalization_check(f: &SpectralField, params: &PhysicalParams) -> Result<f64> {
    let (fbar, _) = zonal_split(f);
    Ok(hs_norm(&fbar, -1.0)? / (params.mu * params.kappa0).powi(2))
}

/// Riemann zeta `Σ_{n>=1} n^{-x}` for `x > 1`: direct sum to `N = 16`, then
/// an Euler-Maclaurin tail.
pub fn zeta(x: f64) -> Result<f64> {
    if !(x > 1.0) || !x.is_finite() {
        return Err(Error::domain(format!("zeta requires x > 1, got {x}")));
    }
    const N: u32 = 16;
    // B_{2j} / (2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let head: f64 = (1..N).map(|k| (k as f64).powf(-x)).sum();
    let nf = N as f64;
    let mut tail = nf.powf(1.0 - x) / (x - 1.0) + 0.5 * nf.powf(-x);
    // rising factorial x (x+1) ... (x+2j-2) times N^{-x-2j+1}
    let mut rising = x;
    let mut pow = nf.powf(-x - 1.0);
    for (j, b) in B.iter().enumerate() {
        tail += b * rising * pow;
        let m = 2.0 * j as f64;
        rising *= (x + m + 1.0) * (x + m + 2.0);
        pow /= nf * nf;
    }
    Ok(head + tail)
}
