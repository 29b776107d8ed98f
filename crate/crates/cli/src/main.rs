//! Command-line front-end: runs case simulations, invariant checks, Sobolev
//! convergence tables, residual reports and the two-branch construction, writing
//! CSV and JSON artifacts.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{sweep_configs, ConfigArgs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<abpeakon::Error> for CliError {
    fn from(e: abpeakon::Error) -> Self {
        use abpeakon::Error as E;
        match e {
            E::InvalidParams(_) | E::Domain(_) | E::UnsupportedCase(_) | E::Precondition(_) => Self::Validation(e.to_string()),
            E::Integration { .. } | E::Numerical(_) => Self::Numerical(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "abpeakon", version, about = "Periodic two-peakon experiments for the cubic ab-family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the case profile (or a single peakon): trajectory.csv, events.json.
    Simulate(ConfigArgs),
    /// Check the closed-form identities and the collision bound: verify.json.
    Verify(ConfigArgs),
    /// H^s distances to the collision profile near the event: sobolev.csv.
    Sobolev(ConfigArgs),
    /// Nonlocal and local residuals of the ansatz state: residual.json.
    Residual(ConfigArgs),
    /// Two solutions from the same collision profile: nonunique.json.
    Nonunique(ConfigArgs),
}

type Runner = fn(&RunConfig) -> Result<(), CliError>;

fn run(runner: Runner, args: &ConfigArgs) -> Result<(), CliError> {
    let base = args.resolve()?;
    let Some(sweep) = &args.sweep else {
        return runner(&base);
    };
    let configs = sweep_configs(&base, sweep)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<Result<(), CliError>> = pool.install(|| configs.par_iter().map(runner).collect());
    let mut worst: Option<CliError> = None;
    for (cfg, r) in configs.iter().zip(results) {
        match r {
            Ok(()) => println!("{}: ok", cfg.output_dir.display()),
            Err(e) => {
                eprintln!("{}: {e}", cfg.output_dir.display());
                if worst.as_ref().is_none_or(|w| e.code() > w.code()) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (runner, args): (Runner, _) = match &cli.command {
        Command::Simulate(a) => (commands::simulate, a),
        Command::Verify(a) => (commands::verify, a),
        Command::Sobolev(a) => (commands::sobolev, a),
        Command::Residual(a) => (commands::residual, a),
        Command::Nonunique(a) => (commands::nonunique, a),
    };
    match run(runner, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abpeakon: {e}");
            ExitCode::from(e.code())
        }
    }
}
