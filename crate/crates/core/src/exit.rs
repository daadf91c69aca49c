//! Monte Carlo exit-time ensembles over `(epsilon, T, alpha)`: trajectory
//! records, CDF estimates with Wilson intervals, scaling-exponent fits and
//! the large-deviation collapse diagnostics.
//!
//! Trajectories are independent tasks seeded by `(master_seed, index)`, so
//! results are a pure function of the plan regardless of thread count.
//! Numerical failures are retained as records and reported, never silently
//! dropped; fits exclude them.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::{evolve, Forcing, IntegratorConfig};
use crate::modulation::{exit_check_fixed_against, exit_check_modulated, ModulationTracker};
use crate::noise::{CovarianceMultiplier, NoiseSpec, WienerSampler};
use crate::soliton::SolitonParams;
use crate::spectral::Grid1D;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitType {
    /// Exit from the H1 ball around the fixed soliton in the co-moving frame.
    Fixed,
    /// Exit from the modulated-soliton neighborhood (velocity window or
    /// remainder norm) tracked by per-step decompositions.
    Modulated,
}

impl ExitType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExitType::Fixed => "fixed",
            ExitType::Modulated => "modulated",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(ExitType::Fixed),
            "modulated" => Some(ExitType::Modulated),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    H1Threshold,
    VelocityThreshold,
    ParametrizationLost,
    Censored,
    NumericalFailure,
}

impl ExitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExitKind::H1Threshold => "h1-threshold",
            ExitKind::VelocityThreshold => "velocity-threshold",
            ExitKind::ParametrizationLost => "parametrization-lost",
            ExitKind::Censored => "censored",
            ExitKind::NumericalFailure => "numerical-failure",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "h1-threshold" => Some(ExitKind::H1Threshold),
            "velocity-threshold" => Some(ExitKind::VelocityThreshold),
            "parametrization-lost" => Some(ExitKind::ParametrizationLost),
            "censored" => Some(ExitKind::Censored),
            "numerical-failure" => Some(ExitKind::NumericalFailure),
            _ => None,
        }
    }

    pub fn is_exit(&self) -> bool {
        matches!(
            self,
            ExitKind::H1Threshold | ExitKind::VelocityThreshold | ExitKind::ParametrizationLost
        )
    }
}

/// One trajectory's outcome.
#[derive(Clone, Debug)]
pub struct ExitRecord {
    pub trial_index: usize,
    pub epsilon: f64,
    /// First step time satisfying the exit check (bias at most one dt); for
    /// censored trajectories the horizon; for failures the failure time.
    pub exit_time: f64,
    pub exit_kind: ExitKind,
    /// Decomposed velocity at the final state (NaN when unavailable).
    pub final_c: f64,
    /// Remainder H1 norm at the final state (NaN when unavailable).
    pub final_eta_h1: f64,
    /// Radiation at the box edge exceeded 1e-3 of the soliton amplitude at
    /// some step (periodic-surrogate validity flag, reported in summaries).
    pub edge_flagged: bool,
}

/// Monte Carlo plan over a noise-amplitude grid.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub grid: Grid1D,
    pub c0: f64,
    pub alpha: f64,
    pub epsilons: Vec<f64>,
    /// Horizon per epsilon (calibrated so that most trials exit).
    pub horizons: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub exit_type: ExitType,
    pub dt: f64,
    pub multiplier: CovarianceMultiplier,
    pub mode_cutoff: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("plan needs at least one trial per epsilon"));
        }
        if self.epsilons.is_empty() {
            return Err(Error::invalid("plan needs a non-empty epsilon grid"));
        }
        if self.epsilons.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::invalid("epsilons must be non-negative"));
        }
        if self.epsilons.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("epsilons must be sorted ascending"));
        }
        if self.horizons.len() != self.epsilons.len() {
            return Err(Error::invalid("need one horizon per epsilon"));
        }
        if self.horizons.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::invalid("horizons must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        NoiseSpec::new(self.grid.clone(), self.multiplier, self.mode_cutoff)?;
        SolitonParams::new(self.c0, 0.0)?;
        Ok(())
    }
}

fn run_trajectory(
    plan: &ExperimentPlan,
    tracker: &ModulationTracker,
    eps_index: usize,
    trial: usize,
) -> ExitRecord {
    let epsilon = plan.epsilons[eps_index];
    let horizon = plan.horizons[eps_index];
    let index = (eps_index * plan.trials + trial) as u64;
    let spec = NoiseSpec::new(plan.grid.clone(), plan.multiplier, plan.mode_cutoff)
        .expect("plan validated");
    let sampler = WienerSampler::new(spec, plan.master_seed, index);

    let reference = tracker.reference();
    let mut cfg = IntegratorConfig::new(plan.grid.clone(), plan.dt).expect("plan validated");
    cfg.frame_velocity = plan.c0;
    cfg.h1_overflow_cap = Some(100.0 * reference.norm_h1());
    let mut forcing = Forcing::stochastic(epsilon, sampler).expect("plan validated");

    let n = plan.grid.n_points();
    let edge_window = 32.min(n / 8);
    let edge_threshold = 1e-3 * 1.5 * plan.c0;

    let mut warm = SolitonParams { c: plan.c0, x0: 0.0 };
    let mut exit: Option<(f64, ExitKind, f64, f64)> = None; // (t, kind, c, eta_h1)
    let mut edge_flagged = false;

    let outcome = evolve(reference, horizon, &cfg, &mut forcing, |_, t, u| {
        if !edge_flagged {
            let vals = u.values();
            let hit = vals[..edge_window]
                .iter()
                .chain(&vals[n - edge_window..])
                .any(|v| v.abs() > edge_threshold);
            if hit {
                edge_flagged = true;
            }
        }
        match plan.exit_type {
            ExitType::Fixed => {
                if exit_check_fixed_against(u, reference, plan.alpha) {
                    exit = Some((t, ExitKind::H1Threshold, f64::NAN, f64::NAN));
                    return false;
                }
            }
            ExitType::Modulated => {
                let d = tracker.decompose(u, warm);
                if d.converged {
                    warm = SolitonParams { c: d.c, x0: d.x0 };
                }
                if exit_check_modulated(&d, plan.alpha, plan.c0) {
                    let kind = if !d.converged {
                        ExitKind::ParametrizationLost
                    } else if (d.c - plan.c0).abs() >= plan.alpha {
                        ExitKind::VelocityThreshold
                    } else {
                        ExitKind::H1Threshold
                    };
                    exit = Some((t, kind, d.c, d.eta_h1));
                    return false;
                }
            }
        }
        true
    });

    match outcome {
        Err(Error::Unstable { time, .. }) => ExitRecord {
            trial_index: trial,
            epsilon,
            exit_time: time,
            exit_kind: ExitKind::NumericalFailure,
            final_c: f64::NAN,
            final_eta_h1: f64::NAN,
            edge_flagged,
        },
        Err(_) => unreachable!("evolve only fails with Unstable for a validated plan"),
        Ok(out) => {
            if let Some((t, kind, mut c, mut eta)) = exit {
                if c.is_nan() {
                    // fixed-frame exit: decompose once for the diagnostics
                    let d = tracker.decompose(&out.state, warm);
                    if d.converged {
                        c = d.c;
                        eta = d.eta_h1;
                    }
                }
                ExitRecord {
                    trial_index: trial,
                    epsilon,
                    exit_time: t,
                    exit_kind: kind,
                    final_c: c,
                    final_eta_h1: eta,
                    edge_flagged,
                }
            } else {
                let d = tracker.decompose(&out.state, warm);
                let (c, eta) = if d.converged { (d.c, d.eta_h1) } else { (f64::NAN, f64::NAN) };
                ExitRecord {
                    trial_index: trial,
                    epsilon,
                    exit_time: horizon,
                    exit_kind: ExitKind::Censored,
                    final_c: c,
                    final_eta_h1: eta,
                    edge_flagged,
                }
            }
        }
    }
}

/// Run the full ensemble; records come back sorted by `(epsilon, trial)`
/// and are a pure function of the plan.
pub fn run_exit_ensemble(plan: &ExperimentPlan) -> Result<Vec<ExitRecord>> {
    plan.validate()?;
    let tracker = ModulationTracker::new(&plan.grid, plan.c0)?;
    let total = plan.epsilons.len() * plan.trials;
    let mut records: Vec<ExitRecord> = (0..total)
        .into_par_iter()
        .map(|idx| run_trajectory(plan, &tracker, idx / plan.trials, idx % plan.trials))
        .collect();
    records.sort_by(|a, b| {
        a.epsilon
            .partial_cmp(&b.epsilon)
            .unwrap()
            .then(a.trial_index.cmp(&b.trial_index))
    });
    Ok(records)
}

#[derive(Clone, Copy, Debug)]
pub struct CdfEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

const WILSON_Z: f64 = 1.959963984540054; // 97.5% normal quantile

/// `P(tau <= t)` estimated from one epsilon group, with the 95% Wilson
/// score interval. Failures are excluded from the denominator.
pub fn estimate_cdf(records: &[ExitRecord], t: f64) -> Result<CdfEstimate> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records".into()));
    }
    let eps = records[0].epsilon;
    if records.iter().any(|r| r.epsilon != eps) {
        return Err(Error::invalid("estimate_cdf needs records from a single epsilon"));
    }
    let usable: Vec<&ExitRecord> = records
        .iter()
        .filter(|r| r.exit_kind != ExitKind::NumericalFailure)
        .collect();
    if usable.is_empty() {
        return Err(Error::InsufficientData("all records are numerical failures".into()));
    }
    let n = usable.len();
    let hits = usable
        .iter()
        .filter(|r| r.exit_kind.is_exit() && r.exit_time <= t)
        .count();
    let p_hat = hits as f64 / n as f64;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n as f64;
    let center = (p_hat + z2 / (2.0 * n as f64)) / denom;
    let half = WILSON_Z * ((p_hat * (1.0 - p_hat) + z2 / (4.0 * n as f64)) / n as f64).sqrt() / denom;
    Ok(CdfEstimate {
        p_hat,
        ci_low: (center - half).max(0.0),
        ci_high: (center + half).min(1.0),
        n,
    })
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    /// Slope of `ln(median exit time)` against `ln(epsilon)`.
    pub exponent: f64,
    /// Intercept in natural-log units.
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Lower median of the exit times in one group, with censored trials
/// ordered above every exit. `None` when the median trial is censored.
fn group_median(records: &[&ExitRecord]) -> Option<f64> {
    let n = records.len();
    if n == 0 {
        return None;
    }
    let mut times: Vec<(f64, bool)> = records
        .iter()
        .map(|r| (r.exit_time, r.exit_kind.is_exit()))
        .collect();
    times.sort_by(|a, b| {
        // censored sorts after every exit, then by time
        (!a.1, a.0).partial_cmp(&(!b.1, b.0)).unwrap()
    });
    let (t, is_exit) = times[(n - 1) / 2];
    if is_exit {
        Some(t)
    } else {
        None
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Least-squares fit of `ln(median exit time)` against `ln(epsilon)`.
///
/// Requires at least 3 epsilon groups with at least half the (non-failed)
/// trials uncensored; otherwise the error names the epsilon values that
/// need longer horizons.
pub fn fit_exit_scaling(records: &[ExitRecord]) -> Result<ScalingFit> {
    let mut groups: Vec<(f64, Vec<&ExitRecord>)> = Vec::new();
    for r in records {
        if r.exit_kind == ExitKind::NumericalFailure {
            continue;
        }
        match groups.iter_mut().find(|(e, _)| *e == r.epsilon) {
            Some((_, v)) => v.push(r),
            None => groups.push((r.epsilon, vec![r])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut starved = Vec::new();
    for (eps, group) in &groups {
        let exited = group.iter().filter(|r| r.exit_kind.is_exit()).count();
        if 2 * exited < group.len() {
            starved.push(*eps);
            continue;
        }
        match group_median(group) {
            Some(med) if med > 0.0 => {
                xs.push(eps.ln());
                ys.push(med.ln());
            }
            _ => starved.push(*eps),
        }
    }
    if !starved.is_empty() || xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs >= 3 epsilon groups with >= 50% uncensored trials; \
             re-run with larger horizons at epsilon = {starved:?} ({} usable groups)",
            xs.len()
        )));
    }
    let (exponent, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ScalingFit { exponent, intercept, r_squared, n_points: xs.len() })
}

#[derive(Clone, Copy, Debug)]
pub struct CollapseCell {
    pub epsilon: f64,
    pub horizon: f64,
    pub p_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollapseMode {
    /// Regress `eps^2 ln p` on `1/T` (modulated-soliton exit).
    Modulated,
    /// Regress `eps^2 ln p` on `1/T^3` (fixed-soliton exit).
    Fixed,
}

#[derive(Clone, Debug)]
pub struct CollapseDiagnostic {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: Vec<CollapseCell>,
    /// Cells with `p_hat` at 0 or 1 (no information in `ln p`).
    pub excluded: Vec<CollapseCell>,
}

/// Pool `(epsilon, T)` cells and fit the large-deviation collapse line;
/// approximate linearity with negative slope is the small-noise prediction.
pub fn collapse_check(cells: &[CollapseCell], mode: CollapseMode) -> Result<CollapseDiagnostic> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &cell in cells {
        if cell.p_hat > 0.0 && cell.p_hat < 1.0 && cell.horizon > 0.0 {
            let x = match mode {
                CollapseMode::Modulated => 1.0 / cell.horizon,
                CollapseMode::Fixed => 1.0 / (cell.horizon * cell.horizon * cell.horizon),
            };
            xs.push(x);
            ys.push(cell.epsilon * cell.epsilon * cell.p_hat.ln());
            used.push(cell);
        } else {
            excluded.push(cell);
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "collapse fit needs >= 2 cells with p in (0,1), got {}",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(CollapseDiagnostic { slope, intercept, r_squared, used, excluded })
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub const RECORDS_CSV_HEADER: &str = "epsilon,trial,exit_time,exit_kind,final_c,final_eta_h1";

/// Canonical CSV rendering (records must already be in canonical order).
pub fn records_to_csv(records: &[ExitRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(r.epsilon),
            r.trial_index,
            fmt_float(r.exit_time),
            r.exit_kind.as_str(),
            fmt_float(r.final_c),
            fmt_float(r.final_eta_h1),
        ));
    }
    out
}

/// Parse records back from the canonical CSV (the `report` pipeline).
pub fn records_from_csv(text: &str) -> Result<Vec<ExitRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORDS_CSV_HEADER => {}
        _ => return Err(Error::invalid("records CSV header mismatch")),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::invalid(format!("records CSV line {}: bad field count", lineno + 2)));
        }
        let parse_f = |s: &str| -> Result<f64> {
            if s == "nan" {
                Ok(f64::NAN)
            } else {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("records CSV line {}: bad float {s}", lineno + 2)))
            }
        };
        records.push(ExitRecord {
            epsilon: parse_f(fields[0])?,
            trial_index: fields[1]
                .parse()
                .map_err(|_| Error::invalid(format!("records CSV line {}: bad trial", lineno + 2)))?,
            exit_time: parse_f(fields[2])?,
            exit_kind: ExitKind::from_str(fields[3])
                .ok_or_else(|| Error::invalid(format!("records CSV line {}: bad kind", lineno + 2)))?,
            final_c: parse_f(fields[4])?,
            final_eta_h1: parse_f(fields[5])?,
            edge_flagged: false,
        });
    }
    Ok(records)
}

/// SHA-256 digest of the canonical CSV; the reproducibility fingerprint.
pub fn records_digest(records: &[ExitRecord]) -> String {
    let mut sorted: Vec<&ExitRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.epsilon
            .partial_cmp(&b.epsilon)
            .unwrap()
            .then(a.trial_index.cmp(&b.trial_index))
    });
    let owned: Vec<ExitRecord> = sorted.into_iter().cloned().collect();
    let csv = records_to_csv(&owned);
    let mut hasher = Sha256::new();
    hasher.update(csv.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(eps: f64, trial: usize, t: f64, kind: ExitKind) -> ExitRecord {
        ExitRecord {
            trial_index: trial,
            epsilon: eps,
            exit_time: t,
            exit_kind: kind,
            final_c: f64::NAN,
            final_eta_h1: f64::NAN,
            edge_flagged: false,
        }
    }

    #[test]
    fn cdf_degenerate_cases() {
        let all_censored: Vec<ExitRecord> =
            (0..10).map(|i| rec(0.1, i, 5.0, ExitKind::Censored)).collect();
        let e = estimate_cdf(&all_censored, 5.0).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.ci_low, 0.0);

        let all_exited: Vec<ExitRecord> =
            (0..10).map(|i| rec(0.1, i, 1.0, ExitKind::H1Threshold)).collect();
        let e = estimate_cdf(&all_exited, 5.0).unwrap();
        assert_eq!(e.p_hat, 1.0);
    }

    #[test]
    fn cdf_wilson_interval_matches_direct_formula() {
        let mut records: Vec<ExitRecord> =
            (0..10).map(|i| rec(0.1, i, 1.0, ExitKind::H1Threshold)).collect();
        records.extend((10..100).map(|i| rec(0.1, i, 9.0, ExitKind::Censored)));
        let e = estimate_cdf(&records, 5.0).unwrap();
        assert!((e.p_hat - 0.1).abs() < 1e-15);
        assert!((e.ci_low - 0.0552).abs() < 5e-4, "low {}", e.ci_low);
        assert!((e.ci_high - 0.1744).abs() < 5e-4, "high {}", e.ci_high);
    }

    #[test]
    fn cdf_rejects_mixed_epsilons() {
        let records = vec![
            rec(0.1, 0, 1.0, ExitKind::H1Threshold),
            rec(0.2, 1, 1.0, ExitKind::H1Threshold),
        ];
        assert!(estimate_cdf(&records, 2.0).is_err());
    }

    #[test]
    fn censoring_consistency_at_horizon() {
        let mut records: Vec<ExitRecord> =
            (0..30).map(|i| rec(0.1, i, 2.0, ExitKind::H1Threshold)).collect();
        records.extend((30..100).map(|i| rec(0.1, i, 10.0, ExitKind::Censored)));
        let e = estimate_cdf(&records, 10.0).unwrap();
        assert!((e.p_hat - 0.3).abs() < 1e-15);
    }

    #[test]
    fn planted_power_laws_are_recovered() {
        let epsilons = [0.02, 0.03, 0.05, 0.08];
        let mut records = Vec::new();
        for &e in &epsilons {
            for i in 0..10 {
                records.push(rec(e, i, e.powf(-2.0 / 3.0), ExitKind::H1Threshold));
            }
        }
        let fit = fit_exit_scaling(&records).unwrap();
        assert!((fit.exponent + 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let mut records = Vec::new();
        for &e in &epsilons {
            for i in 0..10 {
                records.push(rec(e, i, 0.5 * e.powf(-2.0), ExitKind::H1Threshold));
            }
        }
        let fit = fit_exit_scaling(&records).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn starved_groups_are_named() {
        let mut records = Vec::new();
        for &e in &[0.02, 0.03, 0.05] {
            for i in 0..10 {
                let kind = if e == 0.03 { ExitKind::Censored } else { ExitKind::H1Threshold };
                records.push(rec(e, i, 1.0, kind));
            }
        }
        let err = fit_exit_scaling(&records).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("0.03"), "{msg}");
    }

    #[test]
    fn planted_collapse_laws() {
        // p = exp(-3 / (eps^2 T)) -> modulated slope -3, r2 = 1
        let mut cells = Vec::new();
        for &e in &[0.1, 0.2, 0.3] {
            for &t in &[1.0, 2.0, 4.0] {
                cells.push(CollapseCell {
                    epsilon: e,
                    horizon: t,
                    p_hat: (-3.0 / (e * e * t)).exp(),
                });
            }
        }
        let d = collapse_check(&cells, CollapseMode::Modulated).unwrap();
        assert!((d.slope + 3.0).abs() < 1e-9, "slope {}", d.slope);
        assert!((d.r_squared - 1.0).abs() < 1e-12);

        // p = exp(-7 / (eps^2 T^3)) -> fixed slope -7
        let mut cells = Vec::new();
        for &e in &[0.05, 0.1] {
            for &t in &[2.0, 3.0, 5.0] {
                let t3 = t * t * t;
                cells.push(CollapseCell {
                    epsilon: e,
                    horizon: t,
                    p_hat: (-7.0 / (e * e * t3)).exp(),
                });
            }
        }
        let d = collapse_check(&cells, CollapseMode::Fixed).unwrap();
        assert!((d.slope + 7.0).abs() < 1e-9, "slope {}", d.slope);
        assert!((d.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapse_excludes_degenerate_cells() {
        let cells = vec![
            CollapseCell { epsilon: 0.1, horizon: 1.0, p_hat: 0.0 },
            CollapseCell { epsilon: 0.1, horizon: 2.0, p_hat: 0.5 },
            CollapseCell { epsilon: 0.1, horizon: 3.0, p_hat: 0.7 },
            CollapseCell { epsilon: 0.1, horizon: 4.0, p_hat: 1.0 },
        ];
        let d = collapse_check(&cells, CollapseMode::Modulated).unwrap();
        assert_eq!(d.used.len(), 2);
        assert_eq!(d.excluded.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            rec(0.1, 0, 1.25, ExitKind::H1Threshold),
            rec(0.1, 1, 5.0, ExitKind::Censored),
            rec(0.2, 0, 0.5, ExitKind::NumericalFailure),
        ];
        let csv = records_to_csv(&records);
        let parsed = records_from_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0].exit_kind, ExitKind::H1Threshold);
        assert_eq!(parsed[1].exit_kind, ExitKind::Censored);
        assert!((parsed[0].exit_time - 1.25).abs() < 1e-15);
        assert!(parsed[2].final_c.is_nan());
        assert_eq!(records_digest(&records), records_digest(&parsed));
    }
}
