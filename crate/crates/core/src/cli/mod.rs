//! Scenario runner: `divfree run <config> [--out DIR] [--jobs N] [--stamp] [--tol-override X]`.
//!
//! Exit codes: 0 when every residual is below its threshold, 1 on residual
//! failures, 2 on configuration errors, 3 on numerical failures.

pub mod config;
pub mod output;
mod scenarios;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Config, Kind};
pub use output::{Artifact, Cell, Table};
pub use scenarios::{execute, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "divfree", version, about = "Certification runs for divergence-free flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs the scenario described by a TOML config.
    Run(RunArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Output directory (overrides `run.output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Prefix CSV files with a timestamp line.
    #[arg(long)]
    pub stamp: bool,
    /// Replaces the integrator tolerance.
    #[arg(long = "tol-override")]
    pub tol_override: Option<f64>,
}

/// Runs a scenario and returns the process exit code. Failures are listed on stderr.
pub fn run(args: &RunArgs) -> i32 {
    match try_run(args) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("FAIL {f}");
            }
            for f in &outcome.numerical {
                eprintln!("ERROR {f}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn try_run(args: &RunArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = Config::parse(&text)?;
    if let Some(tol) = args.tol_override {
        cfg.override_tolerance(tol);
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.run.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let outcome = pool.install(|| execute(&cfg))?;
    let writer = output::Writer::new(&out_dir, args.stamp)?;
    for artifact in &outcome.artifacts {
        let path = writer.write(artifact, &cfg)?;
        log::info!("wrote {}", path.display());
    }
    Ok(outcome)
}
