use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Truncated Fourier coefficients of a real periodic scalar,
/// `f(x) = Σ_k c_k e^{ik·x}`.
///
/// The full `n x n` spectrum is stored, but every constructor mirrors the
/// canonical half so that `c(-k) = conj(c(k))` holds bit-exactly.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
    mean_zero: bool,
}

/// Real samples on the `n x n` collocation grid, row-major over `(iy, ix)`.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: GridSpec,
    values: Vec<f64>,
}

/// Direction selector for [`transform`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Either representation of a field.
#[derive(Clone, Debug)]
pub enum Field {
    Spectral(SpectralField),
    Physical(PhysicalField),
}

/// Move a field to the other representation. The direction must match
/// the variant supplied.
pub fn transform(field: &Field, direction: Direction) -> Result<Field> {
    match (field, direction) {
        (Field::Physical(p), Direction::Forward) => Ok(Field::Spectral(p.forward())),
        (Field::Spectral(s), Direction::Inverse) => Ok(Field::Physical(s.inverse())),
        (Field::Physical(_), Direction::Inverse) => {
            Err(Error::domain("inverse transform requested for a physical field"))
        }
        (Field::Spectral(_), Direction::Forward) => {
            Err(Error::domain("forward transform requested for a spectral field"))
        }
    }
}

/// Overwrites every non-canonical coefficient with the conjugate of its
/// partner; self-conjugate entries are made real.
pub(crate) fn hermitianize(grid: &GridSpec, coeffs: &mut [Complex64]) {
    for idx in 0..coeffs.len() {
        let m = grid.mirror(idx);
        if m < idx {
            coeffs[idx] = coeffs[m].conj();
        } else if m == idx {
            coeffs[idx].im = 0.0;
        }
    }
}

/// `(-1)^{l2}` phase from the grid's `y` offset of `-L/2`.
#[inline]
fn y_phase(grid: &GridSpec, iy: usize) -> f64 {
    if grid.mode(iy).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

impl SpectralField {
    pub fn zeros(grid: &GridSpec) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
            mean_zero: true,
        }
    }

    /// Builds a field from a full coefficient array; the canonical half wins
    /// and the rest is overwritten to restore Hermitian symmetry.
    pub fn from_coeffs(grid: &GridSpec, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::dimension(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        hermitianize(grid, &mut coeffs);
        let mean_zero = coeffs[0] == Complex64::default();
        Ok(SpectralField { grid: grid.clone(), coeffs, mean_zero })
    }

    pub(crate) fn from_raw(grid: &GridSpec, coeffs: Vec<Complex64>, mean_zero: bool) -> Self {
        SpectralField { grid: grid.clone(), coeffs, mean_zero }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Coefficient at integer wavevector `(l1, l2)`.
    pub fn coeff(&self, l1: i64, l2: i64) -> Complex64 {
        let n = self.grid.n();
        self.coeffs[self.grid.index_of(l2) * n + self.grid.index_of(l1)]
    }

    /// Sets the coefficient at `(l1, l2)` and its conjugate partner.
    pub fn set_mode(&mut self, l1: i64, l2: i64, value: Complex64) {
        let n = self.grid.n();
        let idx = self.grid.index_of(l2) * n + self.grid.index_of(l1);
        let m = self.grid.mirror(idx);
        if m == idx {
            self.coeffs[idx] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[idx] = value;
            self.coeffs[m] = value.conj();
        }
        if idx == 0 {
            self.mean_zero = value == Complex64::default();
        }
    }

    /// Zeroes the `k = 0` coefficient and sets the mean-zero flag.
    pub fn with_mean_removed(mut self) -> Self {
        self.coeffs[0] = Complex64::default();
        self.mean_zero = true;
        self
    }

    pub(crate) fn pin_mean(&mut self) {
        self.coeffs[0] = Complex64::default();
        self.mean_zero = true;
    }

    /// Inverse transform to collocation values.
    pub fn inverse(&self) -> PhysicalField {
        let n = self.grid.n();
        let mut data = self.coeffs.clone();
        for iy in 0..n {
            let p = y_phase(&self.grid, iy);
            if p < 0.0 {
                for c in &mut data[iy * n..(iy + 1) * n] {
                    *c = -*c;
                }
            }
        }
        self.grid.fft2(&mut data, true);
        PhysicalField { grid: self.grid.clone(), values: data.iter().map(|c| c.re).collect() }
    }

    /// Inverse transform of two fields at the cost of one complex FFT.
    pub(crate) fn inverse_pair(a: &SpectralField, b: &SpectralField) -> (Vec<f64>, Vec<f64>) {
        let grid = &a.grid;
        let n = grid.n();
        let i = Complex64::new(0.0, 1.0);
        let mut data: Vec<Complex64> =
            a.coeffs.iter().zip(&b.coeffs).map(|(&ca, &cb)| ca + i * cb).collect();
        for iy in 0..n {
            if y_phase(grid, iy) < 0.0 {
                for c in &mut data[iy * n..(iy + 1) * n] {
                    *c = -*c;
                }
            }
        }
        grid.fft2(&mut data, true);
        let re = data.iter().map(|c| c.re).collect();
        let im = data.iter().map(|c| c.im).collect();
        (re, im)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|idx| (self.coeffs[self.grid.mirror(idx)] - self.coeffs[idx].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * a).collect(),
            mean_zero: self.mean_zero,
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| x + y * a).collect(),
            mean_zero: self.mean_zero && other.mean_zero,
        })
    }

    pub(crate) fn zip_with(
        &self,
        other: &SpectralField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> SpectralField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| f(x, y)).collect(),
            mean_zero: self.mean_zero && other.mean_zero,
        }
    }

    /// Applies a per-mode multiplier `m(idx)`; the multiplier must respect
    /// `m(-k) = conj(m(k))` for the result to stay real.
    pub(crate) fn map_modes(&self, m: impl Fn(usize, Complex64) -> Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| m(i, c)).collect(),
            mean_zero: self.mean_zero,
        }
    }
}

impl PhysicalField {
    pub fn new(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dimension(format!(
                "expected {} samples for n = {}, got {}",
                grid.len(),
                grid.n(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample {bad}")));
        }
        Ok(PhysicalField { grid: grid.clone(), values })
    }

    /// Samples `f(x, y)` at the collocation points.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = grid.y(iy);
            for ix in 0..n {
                values.push(f(grid.x(ix), y));
            }
        }
        PhysicalField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.n() + ix]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Forward transform; the result satisfies Hermitian symmetry exactly.
    pub fn forward(&self) -> SpectralField {
        forward_values(&self.grid, &self.values)
    }
}

pub(crate) fn forward_values(grid: &GridSpec, values: &[f64]) -> SpectralField {
    let n = grid.n();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft2(&mut data, false);
    let norm = 1.0 / (n * n) as f64;
    for iy in 0..n {
        let s = y_phase(grid, iy) * norm;
        for c in &mut data[iy * n..(iy + 1) * n] {
            *c *= s;
        }
    }
    hermitianize(grid, &mut data);
    let mean_zero = data[0] == Complex64::default();
    SpectralField::from_raw(grid, data, mean_zero)
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.map_modes(|_, c| -c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_is_pure_dc() {
        let g = GridSpec::unit(16).unwrap();
        let f = PhysicalField::from_fn(&g, |_, _| 1.0).forward();
        assert!((f.coeff(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let rest: f64 = f.coeffs()[1..].iter().map(|c| c.norm()).sum();
        assert!(rest < 1e-14);
        assert!(!f.mean_zero());
    }

    #[test]
    fn single_cosine_harmonic() {
        let g = GridSpec::unit(16).unwrap();
        let k0 = g.kappa0();
        let f = PhysicalField::from_fn(&g, |x, _| (k0 * x).cos()).forward();
        assert!((f.coeff(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.coeff(-1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let others: f64 = (0..g.len())
            .filter(|&i| !matches!(g.modes_at(i), (1, 0) | (-1, 0)))
            .map(|i| f.coeffs()[i].norm())
            .sum();
        assert!(others < 1e-14);
    }

    #[test]
    fn sine_in_y_respects_offset_grid() {
        // sin(y) has coefficient -i/2 at (0, 1) irrespective of the y offset
        let g = GridSpec::new(3.0, 16).unwrap();
        let k0 = g.kappa0();
        let f = PhysicalField::from_fn(&g, |_, y| (k0 * y).sin()).forward();
        assert!((f.coeff(0, 1) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((f.coeff(0, -1) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn round_trip_and_hermitian() {
        let g = GridSpec::new(2.0 * PI, 32).unwrap();
        let p = PhysicalField::from_fn(&g, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + 0.1 * x.cos());
        let s = p.forward();
        assert_eq!(s.hermitian_defect(), 0.0);
        let back = s.inverse();
        let err = p.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * p.max_abs());
    }

    #[test]
    fn dimension_errors() {
        let g = GridSpec::unit(8).unwrap();
        assert!(matches!(PhysicalField::new(&g, vec![0.0; 63]), Err(Error::Dimension(_))));
        assert!(matches!(SpectralField::from_coeffs(&g, vec![Complex64::default(); 10]), Err(Error::Dimension(_))));
        let p = Field::Physical(PhysicalField::from_fn(&g, |_, _| 0.0));
        assert!(transform(&p, Direction::Inverse).is_err());
        assert!(matches!(transform(&p, Direction::Forward), Ok(Field::Spectral(_))));
    }

    #[test]
    fn inverse_pair_matches_separate_inverses() {
        let g = GridSpec::unit(16).unwrap();
        let a = PhysicalField::from_fn(&g, |x, y| x.sin() * y.sin()).forward();
        let b = PhysicalField::from_fn(&g, |x, y| (2.0 * x).cos() + y.sin()).forward();
        let (pa, pb) = SpectralField::inverse_pair(&a, &b);
        let (ra, rb) = (a.inverse(), b.inverse());
        for i in 0..g.len() {
            assert!((pa[i] - ra.values()[i]).abs() < 1e-14);
            assert!((pb[i] - rb.values()[i]).abs() < 1e-14);
        }
    }
}
