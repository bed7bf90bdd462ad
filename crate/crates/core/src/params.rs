use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Physical parameters of the vorticity equation
/// `∂t ω + ∂(ψ, ω) + (κ0/ε) ∂x ψ = μ Δω + f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Viscosity (length²).
    pub mu: f64,
    /// Inverse rotation rate; `f64::INFINITY` switches the β term off.
    pub epsilon: f64,
    pub kappa0: f64,
}

impl PhysicalParams {
    pub fn new(mu: f64, epsilon: f64, kappa0: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain(format!("mu must be positive, got {mu}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(kappa0 > 0.0 && kappa0.is_finite()) {
            return Err(Error::domain(format!("kappa0 must be positive, got {kappa0}")));
        }
        let p = PhysicalParams { mu, epsilon, kappa0 };
        if p.nu0() > 1.0 {
            log::warn!("nu0 = {} exceeds 1; the e^nu0 < 3 window estimate no longer applies", p.nu0());
        }
        Ok(p)
    }

    pub fn for_grid(mu: f64, epsilon: f64, grid: &GridSpec) -> Result<Self> {
        Self::new(mu, epsilon, grid.kappa0())
    }

    /// `ν0 = μ κ0²`.
    pub fn nu0(&self) -> f64 {
        self.mu * self.kappa0 * self.kappa0
    }

    /// Coefficient `κ0/ε` of the β term (zero without rotation).
    pub fn beta(&self) -> f64 {
        if self.epsilon.is_infinite() {
            0.0
        } else {
            self.kappa0 / self.epsilon
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.mu, epsilon, self.kappa0)
    }
}
