//! Pseudospectral solver for the vorticity equation on the periodic β-plane
//!
//! ```text
//! ∂t ω + ∂(ψ, ω) + (κ0/ε) ∂x ψ = μ Δω + f,    Δψ = ω,
//! ```
//!
//! on `[0, L] × [-L/2, L/2]`, together with determining-mode/node threshold
//! calculators and master-slave synchronization experiments.

pub mod bounds;
pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod params;
pub mod random;
pub mod sync;
pub mod thresholds;

pub use error::{Error, Result};
pub use dynamics::{integrate, step, DiagRecord, IntegratorConfig, Observer, SimState, Stepper};
pub use field::{Direction, Field, PhysicalField, SpectralField};
pub use forcing::{build_forcing, ForcingSpec, ZonalClass};
pub use grid::GridSpec;
pub use params::PhysicalParams;
