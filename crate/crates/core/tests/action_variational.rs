//! Variational-layer cross-checks: the two independent routes to the
//! endpoint minimum, the Euler-Lagrange first integral, refinement
//! behavior, the T^-3 shape of the escape bound, and the control/action
//! identity with its PDE round trip.

use std::f64::consts::PI;

use kdv_lab::action::{
    action_fixed_frame_bound, action_of_path, optimal_action_endpoint, optimize_path,
    synthesize_control, ControlPath, VariationalProblem, SOBOLEV_SHARP,
};
use kdv_lab::integrator::{controlled_solution, evolve, Forcing, IntegratorConfig};
use kdv_lab::modulation::ModulationTracker;
use kdv_lab::soliton::{soliton_profile, SolitonParams};
use kdv_lab::spectral::Grid1D;

fn default_grid() -> Grid1D {
    Grid1D::new(1024, 80.0 * PI).unwrap()
}

#[test]
fn optimizer_agrees_with_the_closed_form() {
    let grid = default_grid();
    let (closed, _) = optimal_action_endpoint(1.0, 0.2, 5.0, &grid).unwrap();
    let prob = VariationalProblem::endpoint(1.0, 0.2, 5.0);
    let opt = optimize_path(&prob, 128, &grid).unwrap();
    assert!(opt.converged, "optimizer did not converge in {} sweeps", opt.sweeps);
    let gap = (opt.action - closed) / closed;
    assert!(
        gap.abs() <= 1e-3,
        "optimizer {} vs closed form {closed} (gap {gap:.2e})",
        opt.action
    );
    // minimization over a subset: at most quadrature dust below the optimum
    assert!(gap >= -1e-4, "optimizer undercut the closed form by {gap:.2e}");
}

#[test]
fn first_integral_constant_along_the_optimal_path() {
    let grid = default_grid();
    let (_, path) = optimal_action_endpoint(1.0, 0.2, 5.0, &grid).unwrap();
    let slopes: Vec<f64> = {
        let c = path.c_values();
        let t = path.times();
        (1..c.len() - 1)
            .map(|i| (c[i + 1] - c[i - 1]) / (t[i + 1] - t[i - 1]))
            .collect()
    };
    let values: Vec<f64> = slopes
        .iter()
        .zip(&path.c_values()[1..path.c_values().len() - 1])
        .map(|(d, &c)| d * d * kdv_lab::soliton::g_coefficient(c, &grid).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for (i, v) in values.iter().enumerate() {
        assert!(
            (v - mean).abs() <= 0.01 * mean,
            "node {i}: first integral {v} vs mean {mean}"
        );
    }
}

#[test]
fn refining_nodes_tightens_the_optimizer() {
    let grid = default_grid();
    let (closed, _) = optimal_action_endpoint(1.0, 0.2, 5.0, &grid).unwrap();
    let prob = VariationalProblem::endpoint(1.0, 0.2, 5.0);
    let mut actions = Vec::new();
    for nodes in [64, 128, 256] {
        let opt = optimize_path(&prob, nodes, &grid).unwrap();
        assert!(opt.converged);
        actions.push(opt.action);
    }
    assert!(actions[1] < actions[0], "64 -> 128 did not decrease: {actions:?}");
    assert!(actions[2] < actions[1], "128 -> 256 did not decrease: {actions:?}");
    let gap0 = actions[0] - closed;
    let gap1 = actions[1] - closed;
    let gap2 = actions[2] - closed;
    assert!(gap0 / gap1 >= 4.0, "gap shrink 64->128 only {:.2}", gap0 / gap1);
    assert!(gap1 / gap2 >= 4.0, "gap shrink 128->256 only {:.2}", gap1 / gap2);
}

#[test]
fn escape_bound_scales_like_t_cubed() {
    let grid = default_grid();
    let mut scaled = Vec::new();
    for &t in &[1.0, 2.0, 5.0, 10.0, 20.0] {
        let bound = action_fixed_frame_bound(1.0, 0.1, t, &grid, SOBOLEV_SHARP).unwrap();
        assert!(bound > 0.0);
        scaled.push(t * t * t * bound);
    }
    let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scaled.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        (max - min) / min < 0.20,
        "T^3-scaled bound varies by {:.1}%: {scaled:?}",
        100.0 * (max - min) / min
    );
}

#[test]
fn control_cost_equals_path_action() {
    let grid = default_grid();
    // an arbitrary valid path, nothing special about it
    let horizon = 4.0;
    let path = ControlPath::uniform(horizon, 96, |t| {
        1.0 + 0.05 * (2.0 * t).sin() + 0.08 * t / horizon
    })
    .unwrap();
    let action = action_of_path(&path, &grid).unwrap();
    let control = synthesize_control(&path, &grid, 1.0).unwrap();
    let cost = control.quadratic_cost();
    assert!(
        (cost - action).abs() <= 1e-6 * action,
        "cost {cost} vs action {action}"
    );
}

#[test]
fn synthesized_control_drives_the_soliton_along_the_path() {
    let grid = default_grid();
    let (c0, alpha, horizon) = (1.0, 0.2, 5.0);
    let (_, path) = optimal_action_endpoint(c0, alpha, horizon, &grid).unwrap();
    let control = synthesize_control(&path, &grid, c0).unwrap();
    let phi = soliton_profile(SolitonParams::new(c0, 0.0).unwrap(), &grid).unwrap();
    let mut cfg = IntegratorConfig::new(grid.clone(), 1e-3).unwrap();
    cfg.frame_velocity = c0;

    let tracker = ModulationTracker::new(&grid, c0).unwrap();
    let mut warm = SolitonParams { c: c0, x0: 0.0 };
    let mut sup_c_err = 0.0f64;
    let path_ref = path.clone();
    let mut forcing = Forcing::control(control);
    let out = evolve(&phi, horizon, &cfg, &mut forcing, |step, t, u| {
        if (step + 1) % 100 == 0 {
            let d = tracker.decompose(u, warm);
            assert!(d.converged, "tracking lost at t = {t}");
            warm = SolitonParams { c: d.c, x0: d.x0 };
            sup_c_err = sup_c_err.max((d.c - path_ref.c_at(t)).abs());
        }
        true
    })
    .unwrap();
    let d = tracker.decompose(&out.state, warm);
    assert!(d.converged);
    let target = c0 + 2.0 * alpha;
    let rel = (d.c - target).abs() / target;
    assert!(rel <= 0.05, "terminal velocity {} vs {target} ({rel:.3})", d.c);
    assert!(sup_c_err <= 0.02 * c0, "sup velocity error {sup_c_err:.4}");
}

#[test]
fn controlled_solution_is_the_control_map() {
    // h == 0 forcing through the dedicated entry point
    let grid = default_grid();
    let path = ControlPath::uniform(1.0, 16, |_| 1.0).unwrap();
    let control = synthesize_control(&path, &grid, 1.0).unwrap();
    let phi = soliton_profile(SolitonParams::new(1.0, 0.0).unwrap(), &grid).unwrap();
    let mut cfg = IntegratorConfig::new(grid.clone(), 1e-3).unwrap();
    cfg.frame_velocity = 1.0;
    let out = controlled_solution(control, &phi, 1.0, &cfg).unwrap();
    assert!(out.state.h1_distance(&phi) / phi.norm_h1() <= 1e-6);
}
