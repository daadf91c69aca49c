use kdv_lab::integrator::{evolve, Forcing, IntegratorConfig};
use kdv_lab::soliton::{soliton_profile, SolitonParams};
use kdv_lab::spectral::Grid1D;
use std::f64::consts::PI;

fn main() {
    for (n, dt) in [(512usize, 4e-3), (512, 1e-3), (1024, 4e-3)] {
        let grid = Grid1D::new(n, 80.0 * PI).unwrap();
        let phi = soliton_profile(SolitonParams::new(1.0, 0.0).unwrap(), &grid).unwrap();
        let mut cfg = IntegratorConfig::new(grid.clone(), dt).unwrap();
        cfg.frame_velocity = 1.0;
        let mut worst: f64 = 0.0;
        let mut at_t = 0.0;
        let out = evolve(&phi, 200.0, &cfg, &mut Forcing::none(), |step, t, u| {
            if step % 250 == 0 {
                let d = u.h1_distance(&phi);
                if d > worst { worst = d; at_t = t; }
            }
            true
        }).unwrap();
        let fin = out.state.h1_distance(&phi);
        println!("N={n} dt={dt}: max H1 drift {worst:.3e} (at t={at_t:.0}), final {fin:.3e}");
    }
}
