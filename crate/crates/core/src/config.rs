//! Run configuration: one canonical TOML tree with a mandatory schema
//! version, strict key checking and defaults for everything else.
//!
//! Violations are collected and reported together — unknown keys, the
//! missing/wrong schema field and every cross-field inconsistency come back
//! in a single error.

use std::f64::consts::PI;

use toml::Value;

use crate::error::{Error, Result};
use crate::exit::ExitType;
use crate::noise::CovarianceMultiplier;

pub const CONFIG_SCHEMA: i64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    ExitScan,
    Action,
    VerifyControl,
    Report,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::ExitScan => "exit-scan",
            ExperimentKind::Action => "action",
            ExperimentKind::VerifyControl => "verify-control",
            ExperimentKind::Report => "report",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(ExperimentKind::Simulate),
            "exit-scan" => Some(ExperimentKind::ExitScan),
            "action" => Some(ExperimentKind::Action),
            "verify-control" => Some(ExperimentKind::VerifyControl),
            "report" => Some(ExperimentKind::Report),
            _ => None,
        }
    }
}

/// Fully resolved configuration; every field holds its final value.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid_n: usize,
    pub grid_length: f64,
    pub dt: f64,
    /// Integration frame velocity; `None` means co-moving with `c0`.
    pub frame_velocity: Option<f64>,
    pub mode_cutoff: usize,
    pub multiplier: CovarianceMultiplier,
    pub c0: f64,
    pub alpha: f64,
    pub sobolev_constant: f64,
    pub kind: ExperimentKind,
    pub exit_type: ExitType,
    pub epsilons: Vec<f64>,
    pub horizons: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    /// Collapse probe times as fractions of each epsilon's horizon.
    pub t_fractions: Vec<f64>,
    /// Horizon grid for the `action` table.
    pub t_grid: Vec<f64>,
    /// Optimizer node count (`action`, `verify-control`).
    pub nodes: usize,
    /// Noise amplitude for a single `simulate` run.
    pub sim_epsilon: f64,
    pub snapshot_stride: usize,
    pub out_dir: String,
}

impl RunConfig {
    pub fn frame_velocity_resolved(&self) -> f64 {
        self.frame_velocity.unwrap_or(self.c0)
    }
}

struct Section<'a> {
    table: Option<&'a toml::map::Map<String, Value>>,
    name: &'static str,
}

struct Checker<'a> {
    violations: &'a mut Vec<String>,
}

impl Checker<'_> {
    fn note(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

fn get_section<'a>(
    root: &'a toml::map::Map<String, Value>,
    name: &'static str,
    allowed: &[&str],
    check: &mut Checker,
) -> Section<'a> {
    match root.get(name) {
        None => Section { table: None, name },
        Some(Value::Table(t)) => {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    check.note(format!("unknown key `{name}.{key}`"));
                }
            }
            Section { table: Some(t), name }
        }
        Some(_) => {
            check.note(format!("`{name}` must be a table"));
            Section { table: None, name }
        }
    }
}

impl Section<'_> {
    fn float(&self, key: &str, default: f64, check: &mut Checker) -> f64 {
        match self.table.and_then(|t| t.get(key)) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(x)) => *x as f64,
            Some(_) => {
                check.note(format!("`{}.{key}` must be a number", self.name));
                default
            }
        }
    }

    fn float_opt(&self, key: &str, check: &mut Checker) -> Option<f64> {
        match self.table.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                check.note(format!("`{}.{key}` must be a number", self.name));
                None
            }
        }
    }

    fn integer(&self, key: &str, default: i64, check: &mut Checker) -> i64 {
        match self.table.and_then(|t| t.get(key)) {
            None => default,
            Some(Value::Integer(x)) => *x,
            Some(_) => {
                check.note(format!("`{}.{key}` must be an integer", self.name));
                default
            }
        }
    }

    fn string(&self, key: &str, check: &mut Checker) -> Option<String> {
        match self.table.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                check.note(format!("`{}.{key}` must be a string", self.name));
                None
            }
        }
    }

    fn float_array(&self, key: &str, check: &mut Checker) -> Option<Vec<f64>> {
        match self.table.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(x) => out.push(*x as f64),
                        _ => {
                            check.note(format!(
                                "`{}.{key}` must be an array of numbers",
                                self.name
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                check.note(format!("`{}.{key}` must be an array of numbers", self.name));
                None
            }
        }
    }
}

/// Parse and fully validate a configuration, applying documented defaults;
/// every violation found is reported in one error.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Value = text
        .parse()
        .map_err(|e| Error::Config(vec![format!("TOML syntax: {e}")]))?;
    let root = match root {
        Value::Table(t) => t,
        _ => return Err(Error::Config(vec!["top level must be a table".into()])),
    };

    let mut violations = Vec::new();
    let mut check = Checker { violations: &mut violations };

    for key in root.keys() {
        if !["schema", "grid", "integrator", "noise", "physics", "experiment", "output"]
            .contains(&key.as_str())
        {
            check.note(format!("unknown key `{key}`"));
        }
    }
    match root.get("schema") {
        None => check.note("missing required `schema` field".to_string()),
        Some(Value::Integer(v)) if *v == CONFIG_SCHEMA => {}
        Some(Value::Integer(v)) => {
            check.note(format!("unsupported schema version {v} (expected {CONFIG_SCHEMA})"))
        }
        Some(_) => check.note("`schema` must be an integer".to_string()),
    }

    let grid = get_section(&root, "grid", &["n_points", "length"], &mut check);
    let integrator =
        get_section(&root, "integrator", &["dt", "frame_velocity"], &mut check);
    let noise = get_section(&root, "noise", &["mode_cutoff", "multiplier"], &mut check);
    let physics =
        get_section(&root, "physics", &["c0", "alpha", "sobolev_constant"], &mut check);
    let experiment = get_section(
        &root,
        "experiment",
        &[
            "kind",
            "exit_type",
            "epsilons",
            "horizon",
            "horizons",
            "trials",
            "master_seed",
            "t_fractions",
            "t_grid",
            "nodes",
            "epsilon",
            "snapshot_stride",
        ],
        &mut check,
    );
    let output = get_section(&root, "output", &["directory"], &mut check);

    let grid_n = grid.integer("n_points", 1024, &mut check);
    let grid_length = grid.float("length", 80.0 * PI, &mut check);
    let dt = integrator.float("dt", 1e-3, &mut check);
    let frame_velocity = integrator.float_opt("frame_velocity", &mut check);
    let c0 = physics.float("c0", 1.0, &mut check);
    let alpha = physics.float("alpha", 0.2, &mut check);
    let sobolev_constant =
        physics.float("sobolev_constant", crate::action::SOBOLEV_SHARP, &mut check);
    let mode_cutoff = noise.integer("mode_cutoff", grid_n.max(0) / 4, &mut check);
    let multiplier = match noise.string("multiplier", &mut check) {
        None => CovarianceMultiplier::H1White,
        Some(id) => CovarianceMultiplier::from_id(&id).unwrap_or_else(|| {
            check.note(format!(
                "unknown `noise.multiplier` id `{id}` (known: h1-white, smooth, identity, zero)"
            ));
            CovarianceMultiplier::H1White
        }),
    };

    let kind = match experiment.string("kind", &mut check) {
        None => {
            check.note("missing required `experiment.kind`".to_string());
            ExperimentKind::Simulate
        }
        Some(s) => ExperimentKind::from_str(&s).unwrap_or_else(|| {
            check.note(format!(
                "unknown `experiment.kind` `{s}` (known: simulate, exit-scan, action, verify-control, report)"
            ));
            ExperimentKind::Simulate
        }),
    };
    let exit_type = match experiment.string("exit_type", &mut check) {
        None => ExitType::Fixed,
        Some(s) => ExitType::from_str(&s).unwrap_or_else(|| {
            check.note(format!("unknown `experiment.exit_type` `{s}` (known: fixed, modulated)"));
            ExitType::Fixed
        }),
    };
    let epsilons = experiment.float_array("epsilons", &mut check).unwrap_or_else(|| {
        match exit_type {
            ExitType::Fixed => vec![0.02, 0.03, 0.05, 0.08],
            ExitType::Modulated => vec![0.1, 0.15, 0.2, 0.3],
        }
    });
    let horizons = match (
        experiment.float_opt("horizon", &mut check),
        experiment.float_array("horizons", &mut check),
    ) {
        (Some(_), Some(_)) => {
            check.note("give `experiment.horizon` or `experiment.horizons`, not both".to_string());
            vec![20.0; epsilons.len()]
        }
        (Some(t), None) => vec![t; epsilons.len()],
        (None, Some(ts)) => ts,
        (None, None) => vec![20.0; epsilons.len()],
    };
    let trials = experiment.integer("trials", 200, &mut check);
    let master_seed = experiment.integer("master_seed", 20260811, &mut check);
    let t_fractions = experiment
        .float_array("t_fractions", &mut check)
        .unwrap_or_else(|| vec![0.15, 0.25, 0.4, 0.65, 1.0]);
    let t_grid = experiment
        .float_array("t_grid", &mut check)
        .unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0]);
    let nodes = experiment.integer("nodes", 128, &mut check);
    let sim_epsilon = experiment.float("epsilon", 0.0, &mut check);
    let snapshot_stride = experiment.integer("snapshot_stride", 100, &mut check);
    let out_dir = output.string("directory", &mut check).unwrap_or_else(|| "out".to_string());

    // cross-field checks, all collected
    if grid_n < 8 || !(grid_n as u64).is_power_of_two() {
        check.note(format!("`grid.n_points` must be a power of two >= 8, got {grid_n}"));
    }
    if !(grid_length > 0.0) {
        check.note(format!("`grid.length` must be positive, got {grid_length}"));
    }
    if !(dt > 0.0) {
        check.note(format!("`integrator.dt` must be positive, got {dt}"));
    }
    if !(c0 > 0.0) {
        check.note(format!("`physics.c0` must be positive, got {c0}"));
    }
    if !(alpha > 0.0) {
        check.note(format!("`physics.alpha` must be positive, got {alpha}"));
    }
    if !(sobolev_constant > 0.0) {
        check.note(format!("`physics.sobolev_constant` must be positive, got {sobolev_constant}"));
    }
    if grid_n >= 8 && mode_cutoff > grid_n / 3 {
        check.note(format!(
            "`noise.mode_cutoff` = {mode_cutoff} violates the K <= N/3 dealiasing rule (N = {grid_n})"
        ));
    }
    if mode_cutoff < 0 {
        check.note("`noise.mode_cutoff` must be >= 0".to_string());
    }
    if trials < 1 {
        check.note(format!("`experiment.trials` must be >= 1, got {trials}"));
    }
    if master_seed < 0 {
        check.note("`experiment.master_seed` must be >= 0".to_string());
    }
    if nodes < 16 {
        check.note(format!("`experiment.nodes` must be >= 16, got {nodes}"));
    }
    if snapshot_stride < 1 {
        check.note("`experiment.snapshot_stride` must be >= 1".to_string());
    }
    if epsilons.is_empty() {
        check.note("`experiment.epsilons` must be non-empty".to_string());
    }
    if epsilons.iter().any(|&e| !(e >= 0.0)) {
        check.note("`experiment.epsilons` must be non-negative".to_string());
    }
    if epsilons.windows(2).any(|w| w[0] > w[1]) {
        check.note("`experiment.epsilons` must be sorted ascending".to_string());
    }
    if horizons.len() != epsilons.len() {
        check.note(format!(
            "`experiment.horizons` needs one entry per epsilon ({} vs {})",
            horizons.len(),
            epsilons.len()
        ));
    }
    if horizons.iter().any(|&t| !(t > 0.0)) {
        check.note("horizons must be positive".to_string());
    }
    if t_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        check.note("`experiment.t_fractions` must lie in (0, 1]".to_string());
    }
    if kind == ExperimentKind::Action {
        if t_grid.iter().any(|&t| !(t >= 1.0)) {
            check.note("`experiment.t_grid` must be >= 1 (the escape-path bound needs T >= 1)".to_string());
        }
        if alpha >= 3.0 * c0 / (4.0 * sobolev_constant) {
            check.note(format!(
                "`physics.alpha` = {alpha} must stay below 3 c0 / (4 C_inf) = {} for the action table",
                3.0 * c0 / (4.0 * sobolev_constant)
            ));
        }
    }
    if kind == ExperimentKind::VerifyControl && !(horizons[0] > 0.0) {
        check.note("verify-control needs a positive `experiment.horizon`".to_string());
    }

    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    Ok(RunConfig {
        grid_n: grid_n as usize,
        grid_length,
        dt,
        frame_velocity,
        mode_cutoff: mode_cutoff as usize,
        multiplier,
        c0,
        alpha,
        sobolev_constant,
        kind,
        exit_type,
        epsilons,
        horizons,
        trials: trials as usize,
        master_seed: master_seed as u64,
        t_fractions,
        t_grid,
        nodes: nodes as usize,
        sim_epsilon,
        snapshot_stride: snapshot_stride as usize,
        out_dir,
    })
}
