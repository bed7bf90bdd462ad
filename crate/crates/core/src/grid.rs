use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square periodic grid on `[0, L] x [-L/2, L/2]` with `n` collocation points
/// per direction.
///
/// Collocation points sit at `x_i = i L / n` and `y_j = -L/2 + j L / n`.
/// Spectral arrays are stored row-major over `(iy, ix)` in FFT order, so
/// index `i` carries the integer wavenumber `i` for `i < n/2` and `i - n`
/// otherwise.
///
/// Cloning is cheap; the FFT plans are shared.
#[derive(Clone)]
pub struct GridSpec {
    inner: Arc<GridInner>,
}

struct GridInner {
    length: f64,
    n: usize,
    kappa0: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl GridSpec {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::domain(format!("domain length must be positive, got {length}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::domain(format!("n must be even and >= 8, got {n}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(GridSpec {
            inner: Arc::new(GridInner { length, n, kappa0: 2.0 * PI / length, fwd, inv }),
        })
    }

    /// The `2π`-periodic box, where `kappa0 = 1`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(2.0 * PI, n)
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn kappa0(&self) -> f64 {
        self.inner.kappa0
    }

    pub fn dx(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// `|M| = L^2`.
    pub fn area(&self) -> f64 {
        self.inner.length * self.inner.length
    }

    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer wavenumber carried by FFT index `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.inner.n;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// FFT index for integer wavenumber `l` (taken modulo `n`).
    #[inline]
    pub fn index_of(&self, l: i64) -> usize {
        l.rem_euclid(self.inner.n as i64) as usize
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.inner.n / 2
    }

    /// Index of the mode `-k` for flat index `idx`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let (iy, ix) = (idx / n, idx % n);
        ((n - iy) % n) * n + (n - ix) % n
    }

    /// Flat index of the mode `(kx, -ky)`.
    #[inline]
    pub fn reflect_y(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let (iy, ix) = (idx / n, idx % n);
        ((n - iy) % n) * n + ix
    }

    /// Largest integer wavenumber kept by the two-thirds rule, the largest
    /// `K` with `3K < n` so that products of kept modes never alias onto
    /// kept modes.
    pub fn dealias_cutoff(&self) -> i64 {
        ((self.inner.n - 1) / 3) as i64
    }

    #[inline]
    pub fn is_dealiased(&self, idx: usize) -> bool {
        let n = self.inner.n;
        let c = self.dealias_cutoff();
        self.mode(idx % n).abs() <= c && self.mode(idx / n).abs() <= c
    }

    /// Integer wavevector `(l1, l2)` of flat index `idx`.
    #[inline]
    pub fn modes_at(&self, idx: usize) -> (i64, i64) {
        let n = self.inner.n;
        (self.mode(idx % n), self.mode(idx / n))
    }

    /// Physical wavevector `(kx, ky)` of flat index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> (f64, f64) {
        let (l1, l2) = self.modes_at(idx);
        (self.inner.kappa0 * l1 as f64, self.inner.kappa0 * l2 as f64)
    }

    /// `|k|^2` of flat index `idx`.
    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        let (kx, ky) = self.wavevector(idx);
        kx * kx + ky * ky
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        -0.5 * self.inner.length + iy as f64 * self.dx()
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::dimension(format!("grid {self:?} does not match grid {other:?}")))
        }
    }

    /// In-place unnormalized 2-D DFT; `inverse` selects the `e^{+ikx}` sign.
    pub(crate) fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.inner.n;
        debug_assert_eq!(data.len(), n * n);
        let plan = if inverse { &self.inner.inv } else { &self.inner.fwd };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.length == other.inner.length)
    }
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("length", &self.inner.length)
            .field("n", &self.inner.n)
            .finish()
    }
}
