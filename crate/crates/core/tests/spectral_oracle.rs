//! Spectral-substrate checks against the independent quadrature oracle,
//! plus the module's algebraic invariants as property tests.

mod common;

use std::f64::consts::PI;

use kdv_lab::soliton::{soliton_profile, SolitonParams};
use kdv_lab::spectral::{Grid1D, SpectralField};
use proptest::prelude::*;

fn default_grid() -> Grid1D {
    Grid1D::new(1024, 80.0 * PI).unwrap()
}

#[test]
fn soliton_inner_product_matches_quadrature() {
    // int phi_1^2 = 6 c^{3/2}; oracle integrates 9/4 sech^4(x/2) directly
    let oracle = common::line_integral(|x| common::phi(1.0, x).powi(2), 80.0);
    assert!((oracle - 6.0).abs() < 1e-10, "oracle {oracle}");
    let g = default_grid();
    let f = soliton_profile(SolitonParams::new(1.0, 0.0).unwrap(), &g).unwrap();
    let spectral = f.inner_l2(&f);
    assert!((spectral - oracle).abs() <= 1e-8, "spectral {spectral} vs oracle {oracle}");
}

#[test]
fn soliton_h1_norm_matches_quadrature() {
    let oracle_sq = common::line_integral(
        |x| common::phi(1.0, x).powi(2) + common::phi_x(1.0, x).powi(2),
        80.0,
    );
    let g = default_grid();
    let f = soliton_profile(SolitonParams::new(1.0, 0.0).unwrap(), &g).unwrap();
    let h1 = f.norm_h1();
    assert!(
        (h1 - oracle_sq.sqrt()).abs() <= 1e-8,
        "h1 {h1} vs oracle {}",
        oracle_sq.sqrt()
    );
    // and the analytic value 6 c^{3/2} + (6/5) c^{5/2} at c = 1
    assert!((oracle_sq - 7.2).abs() < 1e-10);
}

/// Random band-limited real field on a small grid: modes `|j| <= 8`.
fn band_limited_field(grid: &Grid1D, seeds: &[f64]) -> SpectralField {
    let l = grid.length();
    SpectralField::from_fn(grid, |x| {
        let mut v = 0.0;
        for (j, chunk) in seeds.chunks(2).enumerate() {
            let k = 2.0 * PI * (j + 1) as f64 / l;
            v += chunk[0] * (k * x).cos() + chunk.get(1).copied().unwrap_or(0.0) * (k * x).sin();
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_holds(seeds in prop::collection::vec(-2.0f64..2.0, 16)) {
        let grid = Grid1D::new(128, 2.0 * PI).unwrap();
        let f = band_limited_field(&grid, &seeds);
        let physical = f.inner_l2(&f);
        // spectral sum, (dx/N)-normalized
        let n = grid.n_points() as f64;
        let spectral: f64 = f.coefficients().iter().map(|c| c.norm_sqr()).sum::<f64>()
            * grid.dx() / n;
        let scale = physical.abs().max(1e-12);
        prop_assert!((physical - spectral).abs() <= 1e-12 * scale);
    }

    #[test]
    fn derivative_composition(seeds in prop::collection::vec(-2.0f64..2.0, 16)) {
        let grid = Grid1D::new(128, 2.0 * PI).unwrap();
        let f = band_limited_field(&grid, &seeds);
        let d11 = f.derivative(1).derivative(1);
        let d2 = f.derivative(2);
        let scale = d2.max_abs().max(1e-9);
        for (a, b) in d11.values().iter().zip(d2.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn multiplier_round_trip(seeds in prop::collection::vec(-2.0f64..2.0, 16)) {
        let grid = Grid1D::new(128, 2.0 * PI).unwrap();
        let f = band_limited_field(&grid, &seeds);
        let round = f
            .apply_multiplier(|k| (1.0 + k * k).sqrt())
            .apply_multiplier(|k| 1.0 / (1.0 + k * k).sqrt());
        let scale = f.max_abs().max(1e-12);
        for (a, b) in round.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn h1_norm_is_l2_plus_derivative(seeds in prop::collection::vec(-2.0f64..2.0, 16)) {
        let grid = Grid1D::new(128, 2.0 * PI).unwrap();
        let f = band_limited_field(&grid, &seeds);
        let lhs = f.norm_h1().powi(2);
        let dx = f.derivative(1);
        let rhs = f.inner_l2(&f) + dx.inner_l2(&dx);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-12));
    }
}
