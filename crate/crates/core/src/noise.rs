//! Colored Wiener noise on the periodic box.
//!
//! The driving process is `W(t) = sum_i beta_i(t) Phi e_i` over the real
//! orthonormal Fourier system `{1/sqrt(L), sqrt(2/L) cos(k_j x),
//! sqrt(2/L) sin(k_j x)}`, with `Phi` a Fourier multiplier `m(k)` truncated
//! to modes `|j| <= K`. The default multiplier `(1 + k^2)^{-1/2}` makes each
//! retained mode contribute exactly one unit to the Hilbert-Schmidt norm of
//! `Phi : L2 -> H1` (white noise in H1 below the cutoff).
//!
//! One sampler per trajectory: the stream is derived from
//! `(master_seed, trajectory_index)`, so ensembles reproduce bit-for-bit
//! regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::spectral::{Grid1D, SpectralField};

/// Named covariance multipliers `m(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMultiplier {
    /// `(1 + k^2)^{-1/2}`: homogeneous, H1-white below the cutoff.
    H1White,
    /// `(1 + k^2)^{-1}`: one extra degree of smoothing.
    Smooth,
    /// `m == 1` (L2-white; kept for diagnostics, not used in experiments).
    Identity,
    /// `m == 0` (degenerate, test use).
    Zero,
}

impl CovarianceMultiplier {
    pub fn eval(&self, k: f64) -> f64 {
        match self {
            CovarianceMultiplier::H1White => (1.0 + k * k).powf(-0.5),
            CovarianceMultiplier::Smooth => 1.0 / (1.0 + k * k),
            CovarianceMultiplier::Identity => 1.0,
            CovarianceMultiplier::Zero => 0.0,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            CovarianceMultiplier::H1White => "h1-white",
            CovarianceMultiplier::Smooth => "smooth",
            CovarianceMultiplier::Identity => "identity",
            CovarianceMultiplier::Zero => "zero",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "h1-white" => Some(CovarianceMultiplier::H1White),
            "smooth" => Some(CovarianceMultiplier::Smooth),
            "identity" => Some(CovarianceMultiplier::Identity),
            "zero" => Some(CovarianceMultiplier::Zero),
            _ => None,
        }
    }
}

/// Covariance multiplier plus mode cutoff on a concrete grid.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    grid: Grid1D,
    multiplier: CovarianceMultiplier,
    mode_cutoff: usize,
}

impl NoiseSpec {
    /// `mode_cutoff` is the largest retained index `K`; modes `|j| <= K`
    /// survive. It must stay below the dealiasing boundary `N/3`.
    pub fn new(grid: Grid1D, multiplier: CovarianceMultiplier, mode_cutoff: usize) -> Result<Self> {
        if mode_cutoff > grid.n_points() / 3 {
            return Err(Error::invalid(format!(
                "mode cutoff {mode_cutoff} exceeds the dealiasing boundary N/3 = {}",
                grid.n_points() / 3
            )));
        }
        Ok(NoiseSpec { grid, multiplier, mode_cutoff })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn multiplier(&self) -> CovarianceMultiplier {
        self.multiplier
    }

    pub fn mode_cutoff(&self) -> usize {
        self.mode_cutoff
    }

    /// Squared Hilbert-Schmidt norm of `Phi : L2 -> H1`:
    /// `sum over retained basis functions of (1 + k^2) m(k)^2`.
    pub fn hs_norm_squared(&self) -> f64 {
        let base = 2.0 * std::f64::consts::PI / self.grid.length();
        let m0 = self.multiplier.eval(0.0);
        let mut total = m0 * m0;
        for j in 1..=self.mode_cutoff {
            let k = j as f64 * base;
            let m = self.multiplier.eval(k);
            total += 2.0 * (1.0 + k * k) * m * m; // cos and sin partners
        }
        total
    }

    /// Operator norm of `Phi : L2 -> H1` over retained modes:
    /// `max_j sqrt(1 + k_j^2) m(k_j)`.
    pub fn op_norm(&self) -> f64 {
        let base = 2.0 * std::f64::consts::PI / self.grid.length();
        (0..=self.mode_cutoff)
            .map(|j| {
                let k = j as f64 * base;
                (1.0 + k * k).sqrt() * self.multiplier.eval(k)
            })
            .fold(0.0f64, f64::max)
    }
}

/// Seeded stream of Wiener increments for one trajectory.
#[derive(Clone, Debug)]
pub struct WienerSampler {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
}

impl WienerSampler {
    /// The stream is `(master_seed, trajectory_index)`-addressed: equal
    /// pairs reproduce the identical increment sequence bit-for-bit.
    pub fn new(spec: NoiseSpec, master_seed: u64, trajectory_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory_index);
        WienerSampler { spec, rng }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// Draw `Delta W = sqrt(dt) * sum_{|j| <= K} xi_j Phi e_j`.
    ///
    /// The increment is assembled directly in coefficient space: the real
    /// mode pair at `+-j` carries the phase `(-1)^j` that accounts for the
    /// box origin at `-L/2`. Exactly `2K + 1` normals are consumed per call.
    pub fn sample_increment(&mut self, dt: f64) -> SpectralField {
        assert!(dt > 0.0, "Wiener increments need dt > 0, got {dt}");
        let grid = self.spec.grid.clone();
        let n = grid.n_points();
        let length = grid.length();
        let base = 2.0 * std::f64::consts::PI / length;
        let sqrt_dt = dt.sqrt();

        let mut coeffs = vec![Complex::new(0.0, 0.0); n];
        let xi0: f64 = self.rng.sample(StandardNormal);
        coeffs[0] = Complex::new(
            n as f64 * sqrt_dt * self.spec.multiplier.eval(0.0) / length.sqrt() * xi0,
            0.0,
        );
        let pair_amp = 0.5 * n as f64 * sqrt_dt * (2.0 / length).sqrt();
        for j in 1..=self.spec.mode_cutoff {
            let xc: f64 = self.rng.sample(StandardNormal);
            let xs: f64 = self.rng.sample(StandardNormal);
            let k = j as f64 * base;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let amp = pair_amp * self.spec.multiplier.eval(k) * sign;
            let c = Complex::new(amp * xc, -amp * xs);
            coeffs[j] = c;
            coeffs[n - j] = c.conj();
        }
        SpectralField::from_coefficients(&grid, coeffs)
    }
}
