//! Command-line experiment drivers.
//!
//! Every run writes its data file(s) and a `manifest.json` into the output
//! directory. Exit codes: 0 success, 1 invalid configuration, 2 numerical
//! failure, 3 validation failure.

pub mod config;
pub mod output;
pub mod run;
pub mod validate;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, Experiment};
pub use output::RunManifest;
pub use run::{run_experiment, RunOutcome, RunStatus};

use crate::Error;

pub const EXIT_INVALID_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL_FAILURE: u8 = 2;
pub const EXIT_VALIDATION_FAILURE: u8 = 3;

/// Simulator for two coupled spins under a Schrödinger equation with a
/// disentanglement term. Units: ħ = 1, so γ and ω_d are inverse times.
#[derive(Debug, Parser)]
#[command(name = "sim", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config value by dotted key, e.g. `sim.t_max=30` or
    /// `geometry.n1.theta=0.55pi`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Output directory (overrides `output.path`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Random seed (overrides `noise.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bloch vector, purity and norm along one dipolar trajectory.
    Trajectory,
    /// Outcome labels over a θ×φ grid of initial spin-½ directions.
    Basins,
    /// Outcome probability p₊(θ₁) under wrapped-Cauchy rotation noise.
    NoiseCurve,
    /// Reduced Schmidt-coefficient flow for a vanishing Hamiltonian.
    SchmidtFlow,
    /// Run the full property suite and write report.json.
    Validate,
}

impl Command {
    pub fn experiment(self) -> Experiment {
        match self {
            Command::Trajectory => Experiment::Trajectory,
            Command::Basins => Experiment::Basins,
            Command::NoiseCurve => Experiment::NoiseCurve,
            Command::SchmidtFlow => Experiment::SchmidtFlow,
            Command::Validate => Experiment::Validate,
        }
    }
}

/// Resolves the effective configuration from the command line.
pub fn resolve_config(cli: &Cli) -> crate::Result<ExperimentConfig> {
    let mut overrides = cli.overrides.clone();
    overrides.push(format!("experiment=\"{}\"", cli.command.experiment().name()));
    if let Some(out) = &cli.out {
        overrides.push(format!("output.path={}", serde_json::Value::String(out.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("noise.seed={seed}"));
    }
    ExperimentConfig::load(cli.config.as_deref(), &overrides)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => EXIT_INVALID_CONFIG,
        Error::Computation(_) | Error::Stiffness { .. } => EXIT_NUMERICAL_FAILURE,
    }
}

/// Runs the experiment named by `cli`, writing outputs and the manifest.
pub fn execute(cli: &Cli) -> ExitCode {
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(EXIT_INVALID_CONFIG);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(EXIT_NUMERICAL_FAILURE);
        }
    };
    let dir = PathBuf::from(&cfg.output.path);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_NUMERICAL_FAILURE);
    }

    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let clock = Instant::now();
    let outcome = pool.install(|| run_experiment(&cfg, &dir));
    let duration_seconds = clock.elapsed().as_secs_f64();

    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        started_at,
        duration_seconds,
        summary: outcome.summary.clone(),
    };
    if let Err(e) = manifest.write(&dir) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_NUMERICAL_FAILURE);
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", dir.join("manifest.json").display());
    match outcome.status {
        RunStatus::Success => ExitCode::SUCCESS,
        RunStatus::NumericalFailure(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICAL_FAILURE)
        }
        RunStatus::ValidationFailure(msg) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(EXIT_VALIDATION_FAILURE)
        }
    }
}

pub fn main() -> ExitCode {
    execute(&Cli::parse())
}
