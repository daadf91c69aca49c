//! Statistical checks of the Wiener sampler: covariance diagonal,
//! independence across trajectory indices and the dt scaling of increment
//! variance. All at fixed seeds, so the assertions are deterministic.

use std::f64::consts::PI;

use kdv_lab::noise::{CovarianceMultiplier, NoiseSpec, WienerSampler};
use kdv_lab::spectral::{Grid1D, SpectralField};

fn spec(grid: &Grid1D, cutoff: usize) -> NoiseSpec {
    NoiseSpec::new(grid.clone(), CovarianceMultiplier::H1White, cutoff).unwrap()
}

#[test]
fn increment_mean_is_centered() {
    let grid = Grid1D::new(256, 16.0 * PI).unwrap();
    let mut sampler = WienerSampler::new(spec(&grid, 20), 2024, 0);
    let dt = 1e-2;
    let n = grid.n_points();
    let mut mean = vec![0.0f64; n];
    let draws = 10_000;
    for _ in 0..draws {
        let dw = sampler.sample_increment(dt);
        for (m, v) in mean.iter_mut().zip(dw.values()) {
            *m += v;
        }
    }
    // pointwise std of one increment: sqrt(dt * sum m(k)^2 e_j(x)^2) <= sqrt(dt (2K+1) * 2/L)
    let sigma = (dt * 41.0 * 2.0 / grid.length()).sqrt();
    let bound = 4.0 * sigma / (draws as f64).sqrt();
    for (i, m) in mean.iter().enumerate() {
        let avg = m / draws as f64;
        assert!(avg.abs() <= bound, "grid point {i}: mean {avg:.3e} vs 4-sigma {bound:.3e}");
    }
}

#[test]
fn mode_projections_have_multiplier_variance() {
    let grid = Grid1D::new(256, 16.0 * PI).unwrap();
    let noise = spec(&grid, 24);
    let mut sampler = WienerSampler::new(noise.clone(), 7, 0);
    let dt = 4e-3;
    let l = grid.length();
    let modes = [1usize, 5, 20];
    let basis: Vec<SpectralField> = modes
        .iter()
        .map(|&j| {
            let k = 2.0 * PI * j as f64 / l;
            SpectralField::from_fn(&grid, |x| (2.0 / l).sqrt() * (k * x).cos())
        })
        .collect();
    let mut sums = [0.0f64; 3];
    let mut sq_sums = [0.0f64; 3];
    let draws = 10_000;
    for _ in 0..draws {
        let dw = sampler.sample_increment(dt);
        for (i, e) in basis.iter().enumerate() {
            let p = dw.inner_l2(e) / dt.sqrt();
            sums[i] += p;
            sq_sums[i] += p * p;
        }
    }
    for (i, &j) in modes.iter().enumerate() {
        let k = 2.0 * PI * j as f64 / l;
        let expected = noise.multiplier().eval(k).powi(2);
        let mean = sums[i] / draws as f64;
        let var = sq_sums[i] / draws as f64 - mean * mean;
        let rel = (var - expected).abs() / expected;
        assert!(rel <= 0.05, "mode {j}: empirical {var:.5} vs m^2 {expected:.5} ({rel:.3})");
    }
}

#[test]
fn distinct_indices_are_uncorrelated() {
    let grid = Grid1D::new(256, 16.0 * PI).unwrap();
    let mut a = WienerSampler::new(spec(&grid, 12), 99, 0);
    let mut b = WienerSampler::new(spec(&grid, 12), 99, 1);
    let probe = SpectralField::from_fn(&grid, |x| {
        (2.0 / grid.length()).sqrt() * (2.0 * PI * 3.0 * x / grid.length()).cos()
    });
    let n = 4000;
    let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let xa = a.sample_increment(1e-2).inner_l2(&probe);
        let xb = b.sample_increment(1e-2).inner_l2(&probe);
        sa += xa;
        sb += xb;
        sab += xa * xb;
        saa += xa * xa;
        sbb += xb * xb;
    }
    let nf = n as f64;
    let cov = sab / nf - (sa / nf) * (sb / nf);
    let corr = cov / ((saa / nf - (sa / nf).powi(2)) * (sbb / nf - (sb / nf).powi(2))).sqrt();
    assert!(corr.abs() <= 3.0 / nf.sqrt(), "correlation {corr:.4}");
}

#[test]
fn variance_scales_linearly_in_dt() {
    let grid = Grid1D::new(256, 16.0 * PI).unwrap();
    let probe = SpectralField::from_fn(&grid, |x| {
        (2.0 / grid.length()).sqrt() * (2.0 * PI * x / grid.length()).sin()
    });
    let var_at = |dt: f64, seed: u64| {
        let mut s = WienerSampler::new(spec(&grid, 12), seed, 0);
        let n = 6000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.sample_increment(dt).inner_l2(&probe);
            sum += x;
            sq += x * x;
        }
        sq / n as f64 - (sum / n as f64).powi(2)
    };
    let v1 = var_at(1e-3, 5);
    let v2 = var_at(1e-2, 6);
    let ratio = v2 / v1;
    assert!((ratio - 10.0).abs() <= 1.0, "variance ratio {ratio:.3} vs 10");
}
