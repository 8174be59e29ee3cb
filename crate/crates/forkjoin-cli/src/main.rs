//! Experiment driver for fork-join waiting-time and queue-length maxima.
//!
//! Five subcommands map JSON configs onto the `forkjoin` library: `gamma`
//! solves the Cramér–Lundberg root for one service/arrival-rate pair,
//! `simulate` runs a replication batch and writes samples, `compare` tests
//! samples against a limit law, `hetero` ranks service classes by decay
//! rate, and `verify` runs an internal consistency suite.
//!
//! Exit codes: 0 success, 1 unusable config or I/O failure, 2 domain or
//! statistical failure (no positive root, unstable queue, ambiguous class
//! minimum, a KS verdict above threshold). Domain failures still print
//! their report before exiting so the reason stays machine-readable.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "forkjoin",
    version,
    about = "Fork-join extreme-value experiments: decay rates, simulation, limit-law checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config (see configs/ for samples).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for CSV, manifest, and report files; overrides the
    /// config's `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed, overriding the config's `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replication batches; 0 means all cores.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    parallelism: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Cramér–Lundberg root for a service/arrival-rate pair.
    Gamma,
    /// Run a replication batch and write samples plus a manifest.
    Simulate,
    /// Standardize samples and test them against a limit law.
    Compare,
    /// Rank service classes by decay rate and report the winning law.
    Hetero,
    /// Run the internal invariant suite.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real usage
            // errors map to the config-error exit code.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = config::Context {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.parallelism,
    };
    let result = match cli.command {
        Command::Gamma => commands::gamma(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::Hetero => commands::hetero(&ctx),
        Command::Verify => verify::run(&ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
