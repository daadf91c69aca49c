//! Orchestration: dispatch a validated [`RunConfig`] to the module
//! pipelines and emit bit-stable result files plus a manifest.
//!
//! Determinism contract: rerunning the same config reproduces byte-identical
//! CSV/JSON payloads regardless of thread count; only the manifest's
//! `wall_seconds` field varies between runs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::action::{
    action_of_path, heuristic_escape_path, optimal_action_endpoint, optimize_path,
    synthesize_control, VariationalProblem,
};
use crate::config::{ExperimentKind, RunConfig, CONFIG_SCHEMA};
use crate::error::{Error, Result};
use crate::exit::{
    collapse_check, estimate_cdf, fit_exit_scaling, records_digest, records_from_csv,
    records_to_csv, run_exit_ensemble, CollapseCell, CollapseMode, ExitKind, ExitRecord,
    ExitType, ExperimentPlan,
};
use crate::integrator::{evolve, Forcing, IntegratorConfig};
use crate::modulation::ModulationTracker;
use crate::noise::{NoiseSpec, WienerSampler};
use crate::output::Json;
use crate::soliton::{hamiltonian, mass, soliton_profile, SolitonParams};
use crate::spectral::Grid1D;

/// Fraction of numerical failures above which an exit scan is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug)]
pub struct RunOutcome {
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    pub records_digest: Option<String>,
}

/// Execute a config. `threads` pins the rayon pool size (None = default);
/// results do not depend on it.
pub fn run(config: &RunConfig, out_dir: &Path, threads: Option<usize>) -> Result<RunOutcome> {
    match threads {
        None => run_inner(config, out_dir, 0),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config, out_dir, n))
        }
    }
}

fn run_inner(config: &RunConfig, out_dir: &Path, threads: usize) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut outcome = match config.kind {
        ExperimentKind::Simulate => run_simulate(config, out_dir)?,
        ExperimentKind::ExitScan => run_exit_scan(config, out_dir)?,
        ExperimentKind::Action => run_action(config, out_dir)?,
        ExperimentKind::VerifyControl => run_verify_control(config, out_dir)?,
        ExperimentKind::Report => run_report(config, out_dir)?,
    };
    write_manifest(config, out_dir, threads, started.elapsed().as_secs_f64(), &mut outcome)?;
    Ok(outcome)
}

fn grid_of(config: &RunConfig) -> Result<Grid1D> {
    Grid1D::new(config.grid_n, config.grid_length)
}

fn config_echo(config: &RunConfig) -> Json {
    let mut grid = Json::object();
    grid.push("n_points", Json::UInt(config.grid_n as u64))
        .push("length", Json::Float(config.grid_length));
    let mut integrator = Json::object();
    integrator.push("dt", Json::Float(config.dt)).push(
        "frame_velocity",
        match config.frame_velocity {
            Some(v) => Json::Float(v),
            None => Json::Str("co-moving".into()),
        },
    );
    let mut noise = Json::object();
    noise
        .push("mode_cutoff", Json::UInt(config.mode_cutoff as u64))
        .push("multiplier", Json::Str(config.multiplier.id().into()));
    let mut physics = Json::object();
    physics
        .push("c0", Json::Float(config.c0))
        .push("alpha", Json::Float(config.alpha))
        .push("sobolev_constant", Json::Float(config.sobolev_constant));
    let mut experiment = Json::object();
    experiment
        .push("kind", Json::Str(config.kind.as_str().into()))
        .push("exit_type", Json::Str(config.exit_type.as_str().into()))
        .push("epsilons", Json::floats(config.epsilons.iter().copied()))
        .push("horizons", Json::floats(config.horizons.iter().copied()))
        .push("trials", Json::UInt(config.trials as u64))
        .push("master_seed", Json::UInt(config.master_seed))
        .push("t_fractions", Json::floats(config.t_fractions.iter().copied()))
        .push("t_grid", Json::floats(config.t_grid.iter().copied()))
        .push("nodes", Json::UInt(config.nodes as u64))
        .push("epsilon", Json::Float(config.sim_epsilon))
        .push("snapshot_stride", Json::UInt(config.snapshot_stride as u64));
    let mut echo = Json::object();
    echo.push("schema", Json::Int(CONFIG_SCHEMA))
        .push("grid", grid)
        .push("integrator", integrator)
        .push("noise", noise)
        .push("physics", physics)
        .push("experiment", experiment);
    echo
}

fn write_manifest(
    config: &RunConfig,
    out_dir: &Path,
    threads: usize,
    wall_seconds: f64,
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut manifest = Json::object();
    manifest
        .push("schema", Json::Int(CONFIG_SCHEMA))
        .push("kind", Json::Str(config.kind.as_str().into()))
        .push("package_version", Json::Str(env!("CARGO_PKG_VERSION").into()))
        .push("master_seed", Json::UInt(config.master_seed))
        .push("threads", Json::UInt(threads as u64))
        .push("wall_seconds", Json::Float(wall_seconds))
        .push("config", config_echo(config))
        .push("outputs", Json::strings(outcome.files.iter().cloned()))
        .push(
            "records_digest",
            match &outcome.records_digest {
                Some(d) => Json::Str(d.clone()),
                None => Json::Null,
            },
        );
    fs::write(out_dir.join("manifest.json"), manifest.render())?;
    outcome.files.push("manifest.json".into());
    Ok(())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

// ---------------------------------------------------------------------------
// simulate

fn run_simulate(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let grid = grid_of(config)?;
    let c0 = config.c0;
    let u0 = soliton_profile(SolitonParams::new(c0, 0.0)?, &grid)?;
    let tracker = ModulationTracker::new(&grid, c0)?;
    let mut cfg = IntegratorConfig::new(grid.clone(), config.dt)?;
    cfg.frame_velocity = config.frame_velocity_resolved();
    cfg.h1_overflow_cap = Some(100.0 * u0.norm_h1());

    let epsilon = config.sim_epsilon;
    let mut forcing = if epsilon > 0.0 {
        let spec = NoiseSpec::new(grid.clone(), config.multiplier, config.mode_cutoff)?;
        Forcing::stochastic(epsilon, WienerSampler::new(spec, config.master_seed, 0))?
    } else {
        Forcing::none()
    };
    let horizon = config.horizons[0];
    let stride = config.snapshot_stride;

    let mut csv = String::from("t,x_peak,c_fit,eta_h1,mass,hamiltonian\n");
    let mut warm = SolitonParams { c: c0, x0: 0.0 };
    let mut snapshot = |t: f64, u: &crate::spectral::SpectralField, warm: &mut SolitonParams| {
        let (mut idx, mut best) = (0usize, f64::MIN);
        for (i, &v) in u.values().iter().enumerate() {
            if v > best {
                best = v;
                idx = i;
            }
        }
        let d = tracker.decompose(u, *warm);
        let (c_fit, eta) = if d.converged {
            *warm = SolitonParams { c: d.c, x0: d.x0 };
            (d.c, d.eta_h1)
        } else {
            (f64::NAN, f64::NAN)
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(t),
            fmt(u.grid().point(idx)),
            fmt(c_fit),
            fmt(eta),
            fmt(mass(u)),
            fmt(hamiltonian(u)),
        ));
    };
    snapshot(0.0, &u0, &mut warm);
    let out = evolve(&u0, horizon, &cfg, &mut forcing, |step, t, u| {
        if (step + 1) % stride == 0 {
            snapshot(t, u, &mut warm);
        }
        true
    })?;
    if out.steps % stride != 0 {
        snapshot(out.time, &out.state, &mut warm);
    }
    fs::write(out_dir.join("trajectory.csv"), &csv)?;

    let final_dist = out.state.h1_distance(&u0) / u0.norm_h1();
    Ok(RunOutcome {
        files: vec!["trajectory.csv".into()],
        summary: vec![
            format!("simulate: epsilon = {epsilon}, horizon = {horizon}, steps = {}", out.steps),
            format!("final relative H1 distance from the initial soliton: {final_dist:.3e}"),
        ],
        records_digest: None,
    })
}

// ---------------------------------------------------------------------------
// exit-scan

fn plan_from(config: &RunConfig, grid: &Grid1D) -> ExperimentPlan {
    ExperimentPlan {
        grid: grid.clone(),
        c0: config.c0,
        alpha: config.alpha,
        epsilons: config.epsilons.clone(),
        horizons: config.horizons.clone(),
        trials: config.trials,
        master_seed: config.master_seed,
        exit_type: config.exit_type,
        dt: config.dt,
        multiplier: config.multiplier,
        mode_cutoff: config.mode_cutoff,
    }
}

fn group_records(records: &[ExitRecord]) -> Vec<(f64, Vec<&ExitRecord>)> {
    let mut groups: Vec<(f64, Vec<&ExitRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(e, _)| *e == r.epsilon) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.epsilon, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    groups
}

fn fits_json(config: &RunConfig, records: &[ExitRecord]) -> Json {
    let groups = group_records(records);
    let mut rows = Vec::new();
    for (gi, (eps, group)) in groups.iter().enumerate() {
        let horizon = config.horizons.get(gi).copied().unwrap_or(f64::NAN);
        let exits = group.iter().filter(|r| r.exit_kind.is_exit()).count();
        let censored = group.iter().filter(|r| r.exit_kind == ExitKind::Censored).count();
        let failures =
            group.iter().filter(|r| r.exit_kind == ExitKind::NumericalFailure).count();
        let edge = group.iter().filter(|r| r.edge_flagged).count();
        let owned: Vec<ExitRecord> = group.iter().map(|r| (*r).clone()).collect();
        let cdf = estimate_cdf(&owned, horizon).ok();
        let mut exit_times: Vec<f64> = group
            .iter()
            .filter(|r| r.exit_kind.is_exit())
            .map(|r| r.exit_time)
            .collect();
        exit_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if 2 * exits >= group.len() && !exit_times.is_empty() {
            exit_times[((group.len() - 1) / 2).min(exit_times.len() - 1)]
        } else {
            f64::NAN
        };
        let mut row = Json::object();
        row.push("epsilon", Json::Float(*eps))
            .push("horizon", Json::Float(horizon))
            .push("trials", Json::UInt(group.len() as u64))
            .push("exits", Json::UInt(exits as u64))
            .push("censored", Json::UInt(censored as u64))
            .push("failures", Json::UInt(failures as u64))
            .push("edge_flagged", Json::UInt(edge as u64))
            .push("median_exit_time", Json::Float(median))
            .push("p_at_horizon", Json::Float(cdf.map_or(f64::NAN, |c| c.p_hat)))
            .push("ci_low", Json::Float(cdf.map_or(f64::NAN, |c| c.ci_low)))
            .push("ci_high", Json::Float(cdf.map_or(f64::NAN, |c| c.ci_high)));
        rows.push(row);
    }
    let mut fits = Json::object();
    fits.push("exit_type", Json::Str(config.exit_type.as_str().into()))
        .push("c0", Json::Float(config.c0))
        .push("alpha", Json::Float(config.alpha))
        .push("groups", Json::Array(rows));
    match fit_exit_scaling(records) {
        Ok(fit) => {
            let mut obj = Json::object();
            obj.push("exponent", Json::Float(fit.exponent))
                .push("intercept", Json::Float(fit.intercept))
                .push("r_squared", Json::Float(fit.r_squared))
                .push("n_points", Json::UInt(fit.n_points as u64));
            fits.push("scaling_fit", obj);
        }
        Err(e) => {
            let mut obj = Json::object();
            obj.push("error", Json::Str(format!("{e}")));
            fits.push("scaling_fit", obj);
        }
    }
    let failures = records
        .iter()
        .filter(|r| r.exit_kind == ExitKind::NumericalFailure)
        .count();
    fits.push(
        "failure_fraction",
        Json::Float(failures as f64 / records.len().max(1) as f64),
    );
    fits
}

fn collapse_cells(config: &RunConfig, records: &[ExitRecord]) -> Vec<CollapseCell> {
    let groups = group_records(records);
    let mut cells = Vec::new();
    for (gi, (eps, group)) in groups.iter().enumerate() {
        let horizon = match config.horizons.get(gi) {
            Some(&t) => t,
            None => continue,
        };
        let owned: Vec<ExitRecord> = group.iter().map(|r| (*r).clone()).collect();
        for &f in &config.t_fractions {
            let t = f * horizon;
            if let Ok(cdf) = estimate_cdf(&owned, t) {
                cells.push(CollapseCell { epsilon: *eps, horizon: t, p_hat: cdf.p_hat });
            }
        }
    }
    cells
}

fn collapse_json(config: &RunConfig, records: &[ExitRecord]) -> Json {
    let mode = match config.exit_type {
        ExitType::Fixed => CollapseMode::Fixed,
        ExitType::Modulated => CollapseMode::Modulated,
    };
    let cells = collapse_cells(config, records);
    let mut obj = Json::object();
    obj.push("mode", Json::Str(config.exit_type.as_str().into())).push(
        "x_axis",
        Json::Str(match mode {
            CollapseMode::Modulated => "1/T".into(),
            CollapseMode::Fixed => "1/T^3".into(),
        }),
    );
    let mut cell_rows = Vec::new();
    let diag = collapse_check(&cells, mode);
    let used: Vec<(f64, f64)> = diag
        .as_ref()
        .map(|d| d.used.iter().map(|c| (c.epsilon, c.horizon)).collect())
        .unwrap_or_default();
    for c in &cells {
        let mut row = Json::object();
        row.push("epsilon", Json::Float(c.epsilon))
            .push("t", Json::Float(c.horizon))
            .push("p_hat", Json::Float(c.p_hat))
            .push("used", Json::Bool(used.contains(&(c.epsilon, c.horizon))));
        cell_rows.push(row);
    }
    obj.push("cells", Json::Array(cell_rows));
    match diag {
        Ok(d) => {
            let mut fit = Json::object();
            fit.push("slope", Json::Float(d.slope))
                .push("intercept", Json::Float(d.intercept))
                .push("r_squared", Json::Float(d.r_squared))
                .push("cells_used", Json::UInt(d.used.len() as u64))
                .push("cells_excluded", Json::UInt(d.excluded.len() as u64));
            obj.push("fit", fit);
        }
        Err(e) => {
            let mut fit = Json::object();
            fit.push("error", Json::Str(format!("{e}")));
            obj.push("fit", fit);
        }
    }
    obj
}

fn run_exit_scan(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let grid = grid_of(config)?;
    let plan = plan_from(config, &grid);
    let records = run_exit_ensemble(&plan)?;

    fs::write(out_dir.join("records.csv"), records_to_csv(&records))?;
    fs::write(out_dir.join("fits.json"), fits_json(config, &records).render())?;
    fs::write(out_dir.join("collapse.json"), collapse_json(config, &records).render())?;
    let digest = records_digest(&records);

    let failures = records
        .iter()
        .filter(|r| r.exit_kind == ExitKind::NumericalFailure)
        .count();
    let failure_fraction = failures as f64 / records.len() as f64;
    let mut summary = vec![
        format!(
            "exit-scan ({}): {} records, digest {}",
            config.exit_type.as_str(),
            records.len(),
            &digest[..16]
        ),
        match fit_exit_scaling(&records) {
            Ok(fit) => format!(
                "scaling fit: exponent {:.4}, R^2 {:.4} over {} epsilon groups",
                fit.exponent, fit.r_squared, fit.n_points
            ),
            Err(e) => format!("scaling fit unavailable: {e}"),
        },
    ];
    if failure_fraction > MAX_FAILURE_FRACTION {
        summary.push(format!(
            "FAILED: numerical-failure fraction {failure_fraction:.4} exceeds {MAX_FAILURE_FRACTION}"
        ));
        // outputs stay on disk for diagnosis; the run itself is rejected
        return Err(Error::InsufficientData(format!(
            "numerical-failure fraction {failure_fraction:.4} exceeds {MAX_FAILURE_FRACTION}"
        )));
    }
    Ok(RunOutcome {
        files: vec!["records.csv".into(), "fits.json".into(), "collapse.json".into()],
        summary,
        records_digest: Some(digest),
    })
}

// ---------------------------------------------------------------------------
// action

fn run_action(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let grid = grid_of(config)?;
    let (c0, alpha) = (config.c0, config.alpha);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &horizon in &config.t_grid {
        let (closed, _path) = optimal_action_endpoint(c0, alpha, horizon, &grid)?;
        let prob = VariationalProblem {
            kind: crate::action::ProblemKind::Endpoint,
            c0,
            alpha,
            horizon,
            sobolev_constant: config.sobolev_constant,
        };
        let opt = optimize_path(&prob, config.nodes, &grid)?;
        let esc = heuristic_escape_path(c0, alpha, horizon, config.sobolev_constant)?;
        let bound = action_of_path(&esc.path, &grid)?;
        let mut row = Json::object();
        row.push("c0", Json::Float(c0))
            .push("alpha", Json::Float(alpha))
            .push("horizon", Json::Float(horizon))
            .push("closed_form", Json::Float(closed))
            .push("optimizer", Json::Float(opt.action))
            .push("optimizer_converged", Json::Bool(opt.converged))
            .push("optimizer_sweeps", Json::UInt(opt.sweeps as u64))
            .push("t_times_closed_form", Json::Float(horizon * closed))
            .push("heuristic_bound", Json::Float(bound))
            .push(
                "t3_times_heuristic",
                Json::Float(horizon * horizon * horizon * bound),
            )
            .push("gamma", Json::Float(esc.gamma))
            .push("delta", Json::Float(esc.delta))
            .push("escape_condition_met", Json::Bool(esc.condition_met));
        rows.push(row);
        summary.push(format!(
            "T = {horizon}: closed form {closed:.8e}, optimizer {:.8e} (rel gap {:.2e}), T^3 x heuristic {:.6e}",
            opt.action,
            (opt.action - closed).abs() / closed,
            horizon * horizon * horizon * bound
        ));
    }
    let mut table = Json::object();
    table
        .push("nodes", Json::UInt(config.nodes as u64))
        .push("rows", Json::Array(rows));
    fs::write(out_dir.join("action_table.json"), table.render())?;
    Ok(RunOutcome {
        files: vec!["action_table.json".into()],
        summary,
        records_digest: None,
    })
}

// ---------------------------------------------------------------------------
// verify-control

fn run_verify_control(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let grid = grid_of(config)?;
    let (c0, alpha) = (config.c0, config.alpha);
    let horizon = config.horizons[0];
    let (closed, path) = optimal_action_endpoint(c0, alpha, horizon, &grid)?;
    let path_action = action_of_path(&path, &grid)?;
    let control = synthesize_control(&path, &grid, c0)?;
    let cost = control.quadratic_cost();
    let cost_rel_err = (cost - path_action).abs() / path_action;

    let u0 = soliton_profile(SolitonParams::new(c0, 0.0)?, &grid)?;
    let tracker = ModulationTracker::new(&grid, c0)?;
    let mut cfg = IntegratorConfig::new(grid.clone(), config.dt)?;
    cfg.frame_velocity = c0;
    cfg.h1_overflow_cap = Some(100.0 * u0.norm_h1());

    let stride = config.snapshot_stride;
    let mut warm = SolitonParams { c: c0, x0: 0.0 };
    let mut sup_err = 0.0f64;
    let mut csv = String::from("t,c_simulated,c_target\n");
    csv.push_str(&format!("{},{},{}\n", fmt(0.0), fmt(c0), fmt(c0)));
    let path_for_obs = path.clone();
    let out = {
        let mut forcing = Forcing::control(control);
        evolve(&u0, horizon, &cfg, &mut forcing, |step, t, u| {
            if (step + 1) % stride == 0 {
                let d = tracker.decompose(u, warm);
                if d.converged {
                    warm = SolitonParams { c: d.c, x0: d.x0 };
                    let target = path_for_obs.c_at(t);
                    sup_err = sup_err.max((d.c - target).abs());
                    csv.push_str(&format!("{},{},{}\n", fmt(t), fmt(d.c), fmt(target)));
                }
            }
            true
        })?
    };
    let final_d = tracker.decompose(&out.state, warm);
    let target = c0 + 2.0 * alpha;
    let terminal = if final_d.converged { final_d.c } else { f64::NAN };
    let rel_err = (terminal - target).abs() / target;
    sup_err = sup_err.max((terminal - path.c_at(horizon)).abs());
    csv.push_str(&format!("{},{},{}\n", fmt(horizon), fmt(terminal), fmt(path.c_at(horizon))));

    let mut report = Json::object();
    report
        .push("c0", Json::Float(c0))
        .push("alpha", Json::Float(alpha))
        .push("horizon", Json::Float(horizon))
        .push("target_velocity", Json::Float(target))
        .push("terminal_velocity", Json::Float(terminal))
        .push("terminal_velocity_rel_error", Json::Float(rel_err))
        .push("sup_velocity_error", Json::Float(sup_err))
        .push("closed_form_action", Json::Float(closed))
        .push("path_action", Json::Float(path_action))
        .push("control_cost", Json::Float(cost))
        .push("cost_action_rel_error", Json::Float(cost_rel_err))
        .push("decomposition_converged", Json::Bool(final_d.converged));
    fs::write(out_dir.join("control_report.json"), report.render())?;
    fs::write(out_dir.join("control_trajectory.csv"), &csv)?;

    Ok(RunOutcome {
        files: vec!["control_report.json".into(), "control_trajectory.csv".into()],
        summary: vec![
            format!("verify-control: terminal velocity {terminal:.6} vs target {target:.6} (rel err {rel_err:.3e})"),
            format!("control cost {cost:.8e} vs path action {path_action:.8e} (rel err {cost_rel_err:.3e})"),
            format!("sup velocity tracking error {sup_err:.3e}"),
        ],
        records_digest: None,
    })
}

// ---------------------------------------------------------------------------
// report

fn run_report(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let path = out_dir.join("records.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::invalid(format!("report needs {}: {e}", path.display())))?;
    let records = records_from_csv(&text)?;
    fs::write(out_dir.join("fits.json"), fits_json(config, &records).render())?;
    fs::write(out_dir.join("collapse.json"), collapse_json(config, &records).render())?;
    let digest = records_digest(&records);
    let summary = vec![
        format!("report: {} records re-summarized, digest {}", records.len(), &digest[..16]),
        match fit_exit_scaling(&records) {
            Ok(fit) => format!(
                "scaling fit: exponent {:.4}, R^2 {:.4} over {} epsilon groups",
                fit.exponent, fit.r_squared, fit.n_points
            ),
            Err(e) => format!("scaling fit unavailable: {e}"),
        },
    ];
    Ok(RunOutcome {
        files: vec!["fits.json".into(), "collapse.json".into()],
        summary,
        records_digest: Some(digest),
    })
}
