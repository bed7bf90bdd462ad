//! Spectral calculus on periodic fields: derivatives, the inverse
//! Laplacian, the dealiased Jacobian, projections, norms and the
//! y-reflection symmetry.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{forward_values, SpectralField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Fourier multipliers understood by [`differentiate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivative {
    Dx,
    Dy,
    Laplacian,
    /// `(-Δ)^{s/2}`, the `|k|^s` multiplier.
    Power(f64),
}

pub fn differentiate(f: &SpectralField, op: Derivative) -> Result<SpectralField> {
    let grid = f.grid().clone();
    let n = grid.n();
    Ok(match op {
        Derivative::Dx => f.map_modes(|idx, c| {
            if grid.is_nyquist(idx % n) {
                Complex64::default()
            } else {
                I * grid.wavevector(idx).0 * c
            }
        }),
        Derivative::Dy => f.map_modes(|idx, c| {
            if grid.is_nyquist(idx / n) {
                Complex64::default()
            } else {
                I * grid.wavevector(idx).1 * c
            }
        }),
        Derivative::Laplacian => f.map_modes(|idx, c| -grid.k2(idx) * c),
        Derivative::Power(s) => {
            if !s.is_finite() {
                return Err(Error::domain(format!("non-finite derivative order {s}")));
            }
            if s < 0.0 && f.coeffs()[0] != Complex64::default() {
                return Err(Error::domain(format!(
                    "negative power s = {s} applied to a field with nonzero mean"
                )));
            }
            f.map_modes(|idx, c| {
                if idx == 0 {
                    if s == 0.0 {
                        c
                    } else {
                        Complex64::default()
                    }
                } else {
                    grid.k2(idx).powf(0.5 * s) * c
                }
            })
        }
    })
}

/// Streamfunction `ψ = Δ^{-1} ω` with `∫ψ = 0`.
pub fn inv_laplacian(omega: &SpectralField) -> Result<SpectralField> {
    if omega.coeffs()[0] != Complex64::default() {
        return Err(Error::domain("inverse Laplacian of a field with nonzero mean"));
    }
    let grid = omega.grid().clone();
    Ok(omega
        .map_modes(|idx, c| if idx == 0 { Complex64::default() } else { -c / grid.k2(idx) })
        .with_mean_removed())
}

/// Zeroes every mode with `|l1|` or `|l2|` above `n/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    f.map_modes(|idx, c| if grid.is_dealiased(idx) { c } else { Complex64::default() })
}

/// Pseudospectral Jacobian `∂(a, b) = ∂x a ∂y b - ∂x b ∂y a`, dealiased by
/// the two-thirds rule.
pub fn jacobian(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    jacobian_with(a, b, true)
}

pub fn jacobian_with(a: &SpectralField, b: &SpectralField, dealiased: bool) -> Result<SpectralField> {
    a.grid().check_same(b.grid())?;
    let grid = a.grid();
    let (ax, ay) = (differentiate(a, Derivative::Dx)?, differentiate(a, Derivative::Dy)?);
    let (bx, by) = (differentiate(b, Derivative::Dx)?, differentiate(b, Derivative::Dy)?);
    let (pax, pay) = SpectralField::inverse_pair(&ax, &ay);
    let (pbx, pby) = SpectralField::inverse_pair(&bx, &by);
    let prod: Vec<f64> = (0..grid.len()).map(|i| pax[i] * pby[i] - pbx[i] * pay[i]).collect();
    let mut j = forward_values(grid, &prod);
    if dealiased {
        j = dealias(&j);
    }
    j.pin_mean();
    Ok(j)
}

/// `P_κ`: keeps the modes with `|k| <= κ`.
pub fn project_low(f: &SpectralField, kappa: f64) -> SpectralField {
    let grid = f.grid().clone();
    let k0 = grid.kappa0();
    let cut = (kappa / k0).powi(2) * (1.0 + 1e-12);
    f.map_modes(|idx, c| {
        let (l1, l2) = grid.modes_at(idx);
        if ((l1 * l1 + l2 * l2) as f64) <= cut {
            c
        } else {
            Complex64::default()
        }
    })
}

/// `(1 - P_κ)`.
pub fn project_high(f: &SpectralField, kappa: f64) -> SpectralField {
    let grid = f.grid().clone();
    let k0 = grid.kappa0();
    let cut = (kappa / k0).powi(2) * (1.0 + 1e-12);
    f.map_modes(|idx, c| {
        let (l1, l2) = grid.modes_at(idx);
        if ((l1 * l1 + l2 * l2) as f64) <= cut {
            Complex64::default()
        } else {
            c
        }
    })
}

/// Zonal (x-averaged) part and its non-zonal remainder.
pub fn zonal_split(f: &SpectralField) -> (SpectralField, SpectralField) {
    let n = f.grid().n();
    let fbar = f.map_modes(|idx, c| if idx % n == 0 { c } else { Complex64::default() });
    let ftilde = f.map_modes(|idx, c| if idx % n == 0 { Complex64::default() } else { c });
    (fbar, ftilde)
}

/// `∫_M f g dx` via Parseval.
pub fn inner_product(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let s: f64 = f.coeffs().iter().zip(g.coeffs()).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
    Ok(f.grid().area() * s)
}

/// `|f|_{L^2(M)}`.
pub fn l2_norm(f: &SpectralField) -> f64 {
    (f.grid().area() * f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

/// `|∇^s f|_{L^2}` evaluated directly as a spectral sum.
pub fn hs_norm(f: &SpectralField, s: f64) -> Result<f64> {
    if s < 0.0 && f.coeffs()[0] != Complex64::default() {
        return Err(Error::domain(format!("H^{s} norm of a field with nonzero mean")));
    }
    let grid = f.grid();
    let sum: f64 = f
        .coeffs()
        .iter()
        .enumerate()
        .skip(if s == 0.0 { 0 } else { 1 })
        .map(|(idx, c)| {
            let w = if s == 0.0 { 1.0 } else { grid.k2(idx).powf(s) };
            w * c.norm_sqr()
        })
        .sum();
    Ok((grid.area() * sum).sqrt())
}

/// The y-odd part `½(f(x, y) - f(x, -y))`.
pub fn enforce_y_antisymmetry(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    let c = f.coeffs();
    let mut out = f.map_modes(|idx, v| 0.5 * (v - c[grid.reflect_y(idx)]));
    out.pin_mean_if_zero();
    out
}

/// The y-even part `½(f(x, y) + f(x, -y))`.
pub fn y_even_part(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    let c = f.coeffs();
    f.map_modes(|idx, v| 0.5 * (v + c[grid.reflect_y(idx)]))
}

impl SpectralField {
    fn pin_mean_if_zero(&mut self) {
        if self.coeffs()[0] == Complex64::default() {
            self.pin_mean();
        }
    }
}

/// Empirical Agmon ratio `|u|_∞ / (|u|^{1/2} |Δu|^{1/2})`, with the sup
/// taken over the collocation points. `None` for the zero field.
pub fn agmon_ratio(u: &SpectralField) -> Option<f64> {
    let sup = u.inverse().max_abs();
    let a = l2_norm(u);
    let b = hs_norm(u, 2.0).ok()?;
    (a > 0.0 && b > 0.0).then(|| sup / (a * b).sqrt())
}

/// Zonal Agmon ratio `|v̄|_∞ / (κ0^{1/2} |v̄|^{1/2} |∇v̄|^{1/2})` of the
/// zonal part of `u`.
pub fn zonal_agmon_ratio(u: &SpectralField) -> Option<f64> {
    let (ubar, _) = zonal_split(u);
    let sup = ubar.inverse().max_abs();
    let a = l2_norm(&ubar);
    let b = hs_norm(&ubar, 1.0).ok()?;
    (a > 0.0 && b > 0.0).then(|| sup / (u.grid().kappa0().sqrt() * (a * b).sqrt()))
}
