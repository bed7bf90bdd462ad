//! Seeded random fields with a prescribed amplitude spectrum.
//!
//! Generator scheme: a ChaCha8 stream seeded with the 64-bit seed yields one
//! uniform phase per canonical mode (`l2 > 0`, or `l2 = 0` and `l1 > 0`),
//! visited in order of increasing `l1² + l2²`, then `l2`, then `l1`. Only
//! modes inside the two-thirds dealiasing box are populated. The magnitude
//! of each coefficient is the profile value at `|k| / κ0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{enforce_y_antisymmetry, l2_norm};
use crate::field::SpectralField;
use crate::grid::GridSpec;

/// Maps the dimensionless wavenumber `|k| / κ0` to a coefficient magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumProfile {
    Zero,
    /// Unit magnitude where `||k|/κ0 - k| <= halfwidth`.
    Shell { k: f64, #[serde(default)] halfwidth: f64 },
    /// `(|k|/κ0)^slope` on `kmin <= |k|/κ0 <= kmax`.
    Band { kmin: f64, kmax: f64, #[serde(default)] slope: f64 },
}

impl SpectrumProfile {
    pub fn shell(k: f64) -> Self {
        SpectrumProfile::Shell { k, halfwidth: 0.0 }
    }

    pub fn band(kmin: f64, kmax: f64, slope: f64) -> Self {
        SpectrumProfile::Band { kmin, kmax, slope }
    }

    pub fn amplitude(&self, k: f64) -> f64 {
        const TOL: f64 = 1e-9;
        match *self {
            SpectrumProfile::Zero => 0.0,
            SpectrumProfile::Shell { k: k0, halfwidth } => {
                if (k - k0).abs() <= halfwidth + TOL {
                    1.0
                } else {
                    0.0
                }
            }
            SpectrumProfile::Band { kmin, kmax, slope } => {
                if k >= kmin - TOL && k <= kmax + TOL && k > 0.0 {
                    k.powf(slope)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Canonical half-plane modes inside the dealiasing box, in generator order.
fn canonical_modes(grid: &GridSpec) -> Vec<(i64, i64)> {
    let c = grid.dealias_cutoff();
    let mut modes: Vec<(i64, i64)> = (-c..=c)
        .flat_map(|l2| (-c..=c).map(move |l1| (l1, l2)))
        .filter(|&(l1, l2)| l2 > 0 || (l2 == 0 && l1 > 0))
        .collect();
    modes.sort_by_key(|&(l1, l2)| (l1 * l1 + l2 * l2, l2, l1));
    modes
}

/// Deterministic mean-zero random field; `y_odd` projects onto the
/// y-antisymmetric subspace afterwards.
pub fn random_field(seed: u64, profile: &SpectrumProfile, grid: &GridSpec, y_odd: bool) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    for (l1, l2) in canonical_modes(grid) {
        let phase = 2.0 * PI * rng.random::<f64>();
        let k = ((l1 * l1 + l2 * l2) as f64).sqrt();
        let a = profile.amplitude(k);
        if a != 0.0 {
            f.set_mode(l1, l2, Complex64::from_polar(a, phase));
        }
    }
    if y_odd {
        enforce_y_antisymmetry(&f)
    } else {
        f
    }
}

/// Rescales `f` so that its root-mean-square value is `rms`.
pub fn with_rms(f: &SpectralField, rms: f64) -> SpectralField {
    let cur = l2_norm(f) / f.grid().area().sqrt();
    if cur == 0.0 {
        f.clone()
    } else {
        f.scale(rms / cur)
    }
}
