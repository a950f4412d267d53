//! Configuration-driven runner for curve flows and their wave-function equations.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::Value;

use crate::commands::Loaded;
use crate::config::Kind;
use crate::error::CliError;

fn after_help() -> String {
    format!(
        "Flow coefficients A (binormal), B (normal), C (tangential) are expressions:\n\n{}\n\n\
         Exit codes: 0 success, 2 configuration error, 3 numerical failure.\n\
         Errors are also printed to stderr as one JSON object.",
        hasimoto::flow::GRAMMAR
    )
}

/// The argument parser with the expression grammar appended to `--help`.
pub fn command() -> clap::Command {
    Cli::command().after_help(after_help())
}

/// Parses the process arguments, exiting on `--help` or a usage error.
pub fn parse_args() -> Cli {
    let matches = command().get_matches();
    Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit())
}

#[derive(Debug, Parser)]
#[command(name = "hasimoto", version, about = "Evolve space curves and their Hasimoto wave functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the initial curve in R^3 under the configured flow.
    Evolve {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory; overrides `output` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Evolve the wave function of the initial condition.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides `solver.kind` from the config.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Map the initial curve to curvature, torsion and wave function, or a wave back to a curve.
    Transform {
        #[arg(short, long)]
        config: PathBuf,
        /// Node where the torsion phase integral starts.
        #[arg(long, default_value_t = 0)]
        base: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Report whether the flow is binormal, length-preserving, or a power series.
    Classify {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Recompute length and bending-energy diagnostics for a finished evolve or solve run.
    Diagnose {
        /// Directory holding the run's manifest.json.
        #[arg(short, long)]
        run: PathBuf,
        /// Defaults to `<run>/diagnose`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Evolve extrinsically and intrinsically and compare curvature and torsion.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Grid sizes for a convergence study, e.g. `128,256,512`.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(run: &Loaded, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| run.config.output.clone())
}

/// Runs one subcommand and returns its JSON summary.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Evolve { config, out } => {
            let run = Loaded::from_file(&config)?;
            commands::evolve(&run, &output_dir(&run, out))
        }
        Command::Solve { config, kind, out } => {
            let run = Loaded::from_file(&config)?;
            let kind = kind.unwrap_or(run.config.solver.kind);
            commands::solve(&run, kind, &output_dir(&run, out))
        }
        Command::Transform { config, base, out } => {
            let run = Loaded::from_file(&config)?;
            commands::transform(&run, base, &output_dir(&run, out))
        }
        Command::Classify { config, out } => {
            let run = Loaded::from_file(&config)?;
            commands::classify(&run, &output_dir(&run, out))
        }
        Command::Diagnose { run, out } => {
            let out = out.unwrap_or_else(|| run.join("diagnose"));
            commands::diagnose(&run, &out)
        }
        Command::Compare { config, kind, sizes, out } => {
            let run = Loaded::from_file(&config)?;
            let kind = kind.unwrap_or(run.config.solver.kind);
            commands::compare(&run, kind, &sizes, &output_dir(&run, out))
        }
    }
}
