//! `hhmat`: experiment driver for hybrid-admissibility H-matrices.
//!
//! Exit codes: 0 success, 2 configuration error, 3 overflow to infinity in a
//! stored block (outputs are still written), 1 anything else.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Setup};
use config::Config;

#[derive(Parser)]
#[command(name = "hhmat", version, about = "Hybrid-admissibility H-matrices with adaptive mixed-precision storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Point sampling seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for block compression and dense references.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Configuration override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build one matrix; write the container, block table and storage report.
    Build,
    /// Global error of uniform and adaptive storage against the bounds.
    ErrorSweep,
    /// Storage gains of adaptive precision and the S1/S2 ratio.
    StorageGains,
    /// Backward error of the product in each working precision.
    MatvecError,
    /// Switching-level search.
    SwitchLevel,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("out={}", o.display()));
    }
    let cfg = Config::load(cli.config.as_deref(), &overrides).map_err(CliError::Config)?;
    let setup = Setup::new(cfg)?;
    match cli.command {
        Command::Build => commands::build(&setup),
        Command::ErrorSweep => commands::error_sweep(&setup),
        Command::StorageGains => commands::storage_gains(&setup),
        Command::MatvecError => commands::matvec_error(&setup),
        Command::SwitchLevel => commands::switch_level(&setup),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hhmat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
