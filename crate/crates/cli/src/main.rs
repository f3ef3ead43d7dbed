//! `timebin-calib`: simulation, calibration, correction, dynamics and tomography pipeline.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  other error (I/O, invalid parameter, ...)
  2  config parse error (unreadable or malformed JSON)
  3  fringe too flat to fit (FringeFlat)
  4  post-correction verification below threshold (VerificationFailed)
  5  numerical guard tripped (step too large, overlap or amplitude vanished, normalization)
  6  populations inconsistent with a fringe mean (PopulationMismatch)

Logging: set TIMEBIN_CALIB_LOG to error, warn, info or debug.";

#[derive(Debug, Parser)]
#[command(name = "timebin-calib", version, about, after_help = EXIT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the RNG seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "timebin-out")]
    pub out: PathBuf,
    /// Overrides shots per analyzer phase.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Worker threads for per-pair scans.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Run a UMZI cascade and write the post-selected state.
    Generate,
    /// Perturb a state, scan adjacent pairs and estimate relative phases.
    Calibrate,
    /// Build and verify the feed-forward correction.
    Correct,
    /// Propagate driven spins and decompose the accumulated phases.
    Evolve,
    /// Reconstruct a density matrix from simulated pair scans.
    Tomo,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TIMEBIN_CALIB_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
