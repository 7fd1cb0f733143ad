//! `qgeo`: command-line driver for the space-time cone solver.
//!
//! Exit status is 0 when every check passes, 1 on a numerical failure or a
//! failed check, and 2 on bad configuration or input.

mod commands;
mod config;
mod expr;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qgeo", version, about = "Solve and probe the space-time cone equation")]
struct Cli {
    /// Output directory, overriding `output.dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured Dirichlet problem by continuation.
    Solve { config: PathBuf },
    /// Solve down a ladder of scaled right-hand sides.
    Sweep { config: PathBuf },
    /// Random midpoint-concavity scan and comparison battery.
    Scan { config: PathBuf },
    /// Re-check a dumped solution (`.csv` or `.bin`).
    Verify { config: PathBuf, solution: PathBuf },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let config_path = match &cli.command {
        Command::Solve { config } | Command::Sweep { config } | Command::Scan { config } | Command::Verify { config, .. } => config,
    };
    let loaded = config::load(config_path)?;
    let out = cli.out.clone().unwrap_or_else(|| loaded.config.output.dir.clone());
    match &cli.command {
        Command::Solve { .. } => commands::solve(&loaded, &out),
        Command::Sweep { .. } => commands::sweep(&loaded, &out),
        Command::Scan { .. } => commands::scan(&loaded, &out),
        Command::Verify { solution, .. } => commands::verify(&loaded, solution, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
