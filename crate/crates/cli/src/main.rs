//! `kdvlab`: run stochastic-KdV soliton experiments from a TOML config.
//!
//! Subcommands select the pipeline and must match `experiment.kind` in the
//! config. On any pipeline failure a machine-readable `error.json` is left
//! in the output directory and the exit status is nonzero.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use kdv_lab::config::{parse_config, ExperimentKind};
use kdv_lab::experiment::run;

#[derive(Parser)]
#[command(
    name = "kdvlab",
    about = "Soliton persistence experiments for the stochastic KdV equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Size of the worker pool (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and dump snapshot diagnostics.
    Simulate(CommonArgs),
    /// Monte Carlo first-exit ensemble over the epsilon grid.
    ExitScan(CommonArgs),
    /// Evaluate the variational action table over the T grid.
    Action(CommonArgs),
    /// Synthesize the optimal control and verify it through the PDE.
    VerifyControl(CommonArgs),
    /// Re-summarize an existing records.csv.
    Report(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::ExitScan(a)
            | Command::Action(a)
            | Command::VerifyControl(a)
            | Command::Report(a) => a,
        }
    }

    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Simulate(_) => ExperimentKind::Simulate,
            Command::ExitScan(_) => ExperimentKind::ExitScan,
            Command::Action(_) => ExperimentKind::Action,
            Command::VerifyControl(_) => ExperimentKind::VerifyControl,
            Command::Report(_) => ExperimentKind::Report,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            // best-effort machine-readable error report next to the outputs
            let args = cli.command.args();
            let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            if fs::create_dir_all(&out_dir).is_ok() {
                let payload = format!(
                    "{{\n  \"error\": {:?},\n  \"kind\": {:?}\n}}\n",
                    format!("{err:#}"),
                    cli.command.kind().as_str()
                );
                let _ = fs::write(out_dir.join("error.json"), payload);
            }
            ExitCode::FAILURE
        }
    }
}

fn execute(command: &Command) -> anyhow::Result<()> {
    let args = command.args();
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut config = parse_config(&text)?;
    if config.kind != command.kind() {
        bail!(
            "config declares experiment.kind = \"{}\" but the subcommand is \"{}\"",
            config.kind.as_str(),
            command.kind().as_str()
        );
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.out_dir));
    let outcome = run(&config, &out_dir, args.threads)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!(
        "wrote {} file(s) to {}",
        outcome.files.len(),
        out_dir.display()
    );
    Ok(())
}
