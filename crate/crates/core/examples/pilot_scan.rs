use kdv_lab::exit::{fit_exit_scaling, run_exit_ensemble, ExitKind, ExitType, ExperimentPlan};
use kdv_lab::noise::CovarianceMultiplier;
use kdv_lab::spectral::Grid1D;
use std::f64::consts::PI;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let exit_type = if args.get(1).map(|s| s.as_str()) == Some("modulated") {
        ExitType::Modulated
    } else {
        ExitType::Fixed
    };
    let trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(24);
    let cutoff: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2);
    let eps: Vec<f64> = args.get(4).map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![0.003, 0.0045, 0.006, 0.009]);
    let hor: Vec<f64> = args.get(5).map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![200.0, 150.0, 120.0, 90.0]);
    let dt: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(4e-3);

    let grid = Grid1D::new(512, 80.0 * PI).unwrap();
    let plan = ExperimentPlan {
        grid,
        c0: 1.0,
        alpha: 0.2,
        epsilons: eps.clone(),
        horizons: hor.clone(),
        trials,
        master_seed: 7777,
        exit_type,
        dt,
        multiplier: CovarianceMultiplier::H1White,
        mode_cutoff: cutoff,
    };
    let t0 = Instant::now();
    let records = run_exit_ensemble(&plan).unwrap();
    println!("wall: {:.1}s for {} trajectories", t0.elapsed().as_secs_f64(), records.len());
    for &e in &eps {
        let group: Vec<_> = records.iter().filter(|r| r.epsilon == e).collect();
        let exits = group.iter().filter(|r| r.exit_kind.is_exit()).count();
        let fails = group.iter().filter(|r| r.exit_kind == ExitKind::NumericalFailure).count();
        let mut times: Vec<f64> = group.iter().filter(|r| r.exit_kind.is_exit()).map(|r| r.exit_time).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if exits * 2 >= group.len() { times[(group.len() - 1) / 2] } else { f64::NAN };
        let kinds: Vec<&str> = group.iter().map(|r| r.exit_kind.as_str()).collect();
        let h1 = kinds.iter().filter(|k| **k == "h1-threshold").count();
        let vel = kinds.iter().filter(|k| **k == "velocity-threshold").count();
        let mean_dc = group
            .iter()
            .filter(|r| r.exit_kind.is_exit() && r.final_c.is_finite())
            .map(|r| (r.final_c - 1.0).abs())
            .sum::<f64>()
            / exits.max(1) as f64;
        let mean_eta = group
            .iter()
            .filter(|r| r.exit_kind.is_exit() && r.final_eta_h1.is_finite())
            .map(|r| r.final_eta_h1)
            .sum::<f64>()
            / exits.max(1) as f64;
        println!(
            "eps {e}: exits {exits}/{} (h1 {h1}, vel {vel}), failures {fails}, median {med:.2}, q10 {:.2}, q90 {:.2}, |dc|@exit {mean_dc:.4}, eta@exit {mean_eta:.4}",
            group.len(),
            times.first().copied().unwrap_or(f64::NAN),
            times.last().copied().unwrap_or(f64::NAN)
        );
    }
    match fit_exit_scaling(&records) {
        Ok(fit) => println!("scaling fit: slope {:.4}, intercept {:.3}, R2 {:.5}", fit.exponent, fit.intercept, fit.r_squared),
        Err(e) => println!("fit unavailable: {e}"),
    }
}
