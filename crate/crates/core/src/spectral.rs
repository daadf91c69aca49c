//! Periodic-grid fields with spectral differentiation, Fourier multipliers
//! and Sobolev norms.
//!
//! The domain is the box `[-L/2, L/2)` sampled at `N` equispaced points,
//! `N` a power of two. Wavenumbers are stored in FFT order
//! `k_j = 2*pi*j/L` for `j = 0, 1, ..., N/2-1, -N/2, ..., -1`.
//! A [`SpectralField`] always carries both the physical samples and their
//! discrete Fourier transform; the two are kept consistent by construction
//! and fields are immutable afterwards, so they can be shared freely across
//! parallel trajectories.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridInner {
    n: usize,
    length: f64,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[-L/2, L/2)`.
///
/// Cloning is cheap; the transform plans are shared.
#[derive(Clone)]
pub struct Grid1D {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n_points", &self.inner.n)
            .field("length", &self.inner.length)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.length == other.inner.length
    }
}

impl Grid1D {
    /// Build a grid with `n_points` samples (power of two, >= 8) on a box of
    /// length `length > 0`.
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("length must be positive, got {length}")));
        }
        let n = n_points;
        let base = 2.0 * std::f64::consts::PI / length;
        let mut wavenumbers = vec![0.0; n];
        for (j, k) in wavenumbers.iter_mut().enumerate() {
            let signed = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
            *k = signed as f64 * base;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Grid1D {
            inner: Arc::new(GridInner { n, length, wavenumbers, fft, ifft }),
        })
    }

    pub fn n_points(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn dx(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// Physical coordinate of sample `i`: `x_i = -L/2 + i*dx`.
    pub fn point(&self, i: usize) -> f64 {
        -0.5 * self.inner.length + i as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.inner.n).map(move |i| self.point(i))
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex<f64>]) {
        self.inner.fft.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex<f64>]) {
        self.inner.ifft.process(buf);
    }
}

/// Real-valued function on a [`Grid1D`] with cached Fourier coefficients.
///
/// `coefficients` holds the unnormalized forward DFT of `values`; the
/// inverse transform divides by `N`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid1D,
    values: Vec<f64>,
    coefficients: Vec<Complex<f64>>,
}

impl SpectralField {
    /// Field from physical samples.
    pub fn from_values(grid: &Grid1D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_points(), "sample count must match grid");
        let mut coefficients: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        grid.fft_forward(&mut coefficients);
        SpectralField { grid: grid.clone(), values, coefficients }
    }

    /// Field from Fourier coefficients of a real signal.
    ///
    /// Conjugate symmetry is enforced by averaging each mode with the
    /// conjugate of its partner, so tiny asymmetries from accumulated
    /// round-off cannot leak an imaginary part into the samples.
    pub fn from_coefficients(grid: &Grid1D, mut coefficients: Vec<Complex<f64>>) -> Self {
        let n = grid.n_points();
        assert_eq!(coefficients.len(), n, "coefficient count must match grid");
        coefficients[0].im = 0.0;
        coefficients[n / 2].im = 0.0;
        for j in 1..n / 2 {
            let avg = 0.5 * (coefficients[j] + coefficients[n - j].conj());
            coefficients[j] = avg;
            coefficients[n - j] = avg.conj();
        }
        let mut buf = coefficients.clone();
        grid.fft_inverse(&mut buf);
        let scale = 1.0 / n as f64;
        let values = buf.iter().map(|z| z.re * scale).collect();
        SpectralField { grid: grid.clone(), values, coefficients }
    }

    /// Sample a closure on the grid points.
    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self::from_values(grid, values)
    }

    pub fn zero(grid: &Grid1D) -> Self {
        SpectralField {
            grid: grid.clone(),
            values: vec![0.0; grid.n_points()],
            coefficients: vec![Complex::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> &[Complex<f64>] {
        &self.coefficients
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Spectral derivative of order 1, 2 or 3.
    ///
    /// Coefficients are multiplied by `(ik)^order`; the Nyquist mode is
    /// zeroed for odd orders (it has no conjugate partner, so an odd power
    /// of `ik` would break the real symmetry).
    pub fn derivative(&self, order: u32) -> SpectralField {
        assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
        let n = self.grid.n_points();
        let ks = self.grid.wavenumbers();
        let mut coeffs = self.coefficients.clone();
        for (j, c) in coeffs.iter_mut().enumerate() {
            if order % 2 == 1 && j == n / 2 {
                *c = Complex::new(0.0, 0.0);
                continue;
            }
            let ik = Complex::new(0.0, ks[j]);
            *c *= ik.powu(order);
        }
        SpectralField::from_coefficients(&self.grid, coeffs)
    }

    /// Apply a Fourier multiplier `m(k)` mode-wise. `m` must be even in `k`
    /// for the result to stay real.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> SpectralField {
        let ks = self.grid.wavenumbers();
        let coeffs = self
            .coefficients
            .iter()
            .zip(ks)
            .map(|(c, &k)| c * m(k))
            .collect();
        SpectralField::from_coefficients(&self.grid, coeffs)
    }

    /// Exact spectral translation `u(x) -> u(x + shift)`; valid for shifts
    /// that are not grid-aligned.
    pub fn translate(&self, shift: f64) -> SpectralField {
        let ks = self.grid.wavenumbers();
        let coeffs = self
            .coefficients
            .iter()
            .zip(ks)
            .map(|(c, &k)| c * Complex::from_polar(1.0, k * shift))
            .collect();
        SpectralField::from_coefficients(&self.grid, coeffs)
    }

    /// L2 pairing `dx * sum_j f_j g_j`; spectrally exact for band-limited
    /// integrands. Panics on grid mismatch.
    pub fn inner_l2(&self, other: &SpectralField) -> f64 {
        assert!(
            self.grid == other.grid,
            "inner_l2 requires both fields on the same grid"
        );
        let dx = self.grid.dx();
        dx * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner_l2(self).max(0.0).sqrt()
    }

    /// Sobolev H1 norm, computed spectrally as
    /// `sqrt( (dx/N) * sum_k (1 + k^2) |F_k|^2 )`.
    ///
    /// The `k^2` weight uses the same odd-derivative convention as
    /// [`SpectralField::derivative`] (Nyquist zeroed), which makes
    /// `norm_h1(f)^2 == inner_l2(f,f) + inner_l2(f',f')` an identity rather
    /// than a band-limited approximation.
    pub fn norm_h1(&self) -> f64 {
        self.norm_h1_squared().max(0.0).sqrt()
    }

    pub(crate) fn norm_h1_squared(&self) -> f64 {
        let n = self.grid.n_points();
        let ks = self.grid.wavenumbers();
        let scale = self.grid.dx() / n as f64;
        let mut total = 0.0;
        for (j, c) in self.coefficients.iter().enumerate() {
            let kd = if j == n / 2 { 0.0 } else { ks[j] };
            total += (1.0 + kd * kd) * c.norm_sqr();
        }
        scale * total
    }

    /// H1 distance `||self - other||_{H1}` without materializing the
    /// difference field.
    pub fn h1_distance(&self, other: &SpectralField) -> f64 {
        assert!(self.grid == other.grid, "h1_distance requires matching grids");
        let n = self.grid.n_points();
        let ks = self.grid.wavenumbers();
        let scale = self.grid.dx() / n as f64;
        let mut total = 0.0;
        for (j, (a, b)) in self.coefficients.iter().zip(&other.coefficients).enumerate() {
            let kd = if j == n / 2 { 0.0 } else { ks[j] };
            total += (1.0 + kd * kd) * (a - b).norm_sqr();
        }
        (scale * total).max(0.0).sqrt()
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &SpectralField, factor: f64) -> SpectralField {
        assert!(self.grid == other.grid, "add_scaled requires matching grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + factor * b)
            .collect();
        let coefficients = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a + b * factor)
            .collect();
        SpectralField { grid: self.grid.clone(), values, coefficients }
    }

    pub fn scaled(&self, factor: f64) -> SpectralField {
        let values = self.values.iter().map(|v| v * factor).collect();
        let coefficients = self.coefficients.iter().map(|c| c * factor).collect();
        SpectralField { grid: self.grid.clone(), values, coefficients }
    }
}

impl std::ops::Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.add_scaled(rhs, 1.0)
    }
}

impl std::ops::Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.add_scaled(rhs, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn make_grid_basic() {
        let g = Grid1D::new(8, 2.0 * PI).unwrap();
        assert_eq!(g.n_points(), 8);
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        let expected = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (k, e) in g.wavenumbers().iter().zip(expected) {
            assert!((k - e).abs() < 1e-14, "wavenumber {k} vs {e}");
        }
        let g = Grid1D::new(1024, 80.0 * PI).unwrap();
        assert!((g.dx() - 80.0 * PI / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(Grid1D::new(7, 1.0).is_err());
        assert!(Grid1D::new(12, 1.0).is_err());
        assert!(Grid1D::new(4, 1.0).is_err());
        assert!(Grid1D::new(8, 0.0).is_err());
        assert!(Grid1D::new(8, -1.0).is_err());
    }

    #[test]
    fn derivative_of_single_modes() {
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, |x| x.sin());
        let d1 = f.derivative(1);
        for (i, v) in d1.values().iter().enumerate() {
            assert!((v - g.point(i).cos()).abs() < 1e-12);
        }
        // order 3: FFT round-off scales with k_max^3, so keep the band small
        let g3 = Grid1D::new(32, 2.0 * PI).unwrap();
        let f3 = SpectralField::from_fn(&g3, |x| x.sin());
        let d3 = f3.derivative(3);
        for (i, v) in d3.values().iter().enumerate() {
            assert!((v + g3.point(i).cos()).abs() < 1e-12);
        }
        let c = SpectralField::from_fn(&g, |_| 2.5);
        for order in 1..=3 {
            assert!(c.derivative(order).max_abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_identity_and_single_mode() {
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, |x| (2.0 * x).sin());
        let id = f.apply_multiplier(|_| 1.0);
        for (a, b) in id.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let smoothed = f.apply_multiplier(|k| (1.0 + k * k).powf(-0.5));
        for (i, v) in smoothed.values().iter().enumerate() {
            let expected = (2.0 * g.point(i)).sin() / 5.0f64.sqrt();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_l2_orthogonality_and_constants() {
        let g = Grid1D::new(128, 2.0 * PI).unwrap();
        let s = SpectralField::from_fn(&g, |x| x.sin());
        let c = SpectralField::from_fn(&g, |x| x.cos());
        assert!(s.inner_l2(&c).abs() < 1e-12);
        let one = SpectralField::from_fn(&g, |_| 1.0);
        assert!((one.inner_l2(&one) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "same grid")]
    fn inner_l2_grid_mismatch_panics() {
        let g1 = Grid1D::new(64, 2.0 * PI).unwrap();
        let g2 = Grid1D::new(128, 2.0 * PI).unwrap();
        let a = SpectralField::zero(&g1);
        let b = SpectralField::zero(&g2);
        let _ = a.inner_l2(&b);
    }

    #[test]
    fn norm_h1_of_sine() {
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let s = SpectralField::from_fn(&g, |x| x.sin());
        assert!((s.norm_h1() - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert_eq!(SpectralField::zero(&g).norm_h1(), 0.0);
    }

    #[test]
    fn translate_matches_shifted_samples() {
        let g = Grid1D::new(128, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(&g, |x| x.sin() + 0.3 * (3.0 * x).cos());
        let shift = 0.4321; // not grid aligned
        let t = f.translate(shift);
        for (i, v) in t.values().iter().enumerate() {
            let x = g.point(i) + shift;
            let expected = x.sin() + 0.3 * (3.0 * x).cos();
            assert!((v - expected).abs() < 1e-12);
        }
    }
}
