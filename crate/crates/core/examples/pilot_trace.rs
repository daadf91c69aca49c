use kdv_lab::integrator::{evolve, Forcing, IntegratorConfig};
use kdv_lab::modulation::ModulationTracker;
use kdv_lab::noise::{CovarianceMultiplier, NoiseSpec, WienerSampler};
use kdv_lab::soliton::{soliton_profile, SolitonParams};
use kdv_lab::spectral::Grid1D;
use std::f64::consts::PI;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let eps: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.003);
    let idx: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grid = Grid1D::new(512, 80.0 * PI).unwrap();
    let phi = soliton_profile(SolitonParams::new(1.0, 0.0).unwrap(), &grid).unwrap();
    let tracker = ModulationTracker::new(&grid, 1.0).unwrap();
    let mut cfg = IntegratorConfig::new(grid.clone(), 4e-3).unwrap();
    cfg.frame_velocity = 1.0;
    cfg.h1_overflow_cap = Some(100.0 * phi.norm_h1());
    let spec = NoiseSpec::new(grid.clone(), CovarianceMultiplier::H1White, 2).unwrap();
    let mut forcing = Forcing::stochastic(eps, WienerSampler::new(spec, 7777, idx)).unwrap();
    let mut warm = SolitonParams { c: 1.0, x0: 0.0 };
    println!("t,dist,c,x0,eta_h1,mean_level");
    evolve(&phi, 120.0, &cfg, &mut forcing, |step, t, u| {
        if step % 1000 == 0 {
            let d = tracker.decompose(u, warm);
            if d.converged {
                warm = SolitonParams { c: d.c, x0: d.x0 };
            }
            let mean = u.values().iter().sum::<f64>() / u.values().len() as f64;
            println!(
                "{t:.1},{:.4},{:.5},{:.4},{:.4},{:.5}",
                u.h1_distance(&phi), d.c, d.x0, d.eta_h1, mean
            );
        }
        true
    })
    .unwrap();
}
