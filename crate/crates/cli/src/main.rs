//! `layered-fronts`: exponents, fronts and oracle checks from a JSON config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layered_fronts::Error as LibError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(LibError),
    #[error("check failed: {0}")]
    Check(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Check(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        match e {
            LibError::NonPositiveDefinite { .. }
            | LibError::NonPositive { .. }
            | LibError::NegativeGrowth { .. }
            | LibError::InterfaceOutOfRange(_)
            | LibError::DimensionMismatch { .. }
            | LibError::NotOnSimplex { .. }
            | LibError::PreconditionViolation(_)
            | LibError::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Parser)]
#[command(name = "layered-fronts", version, about = "Front propagation in two-layer media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the exponent λ and its maximising occupation.
    Lambda(Common),
    /// Fronts G_t: intervals, polygons or reachability masks.
    Front(Common),
    /// Compare the PDE and Monte Carlo oracles with the limiting exponent.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run config, or a manifest written by an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies the DP space and time resolution.
    #[arg(long)]
    grid_scale: Option<usize>,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (name, common) = match &cli.command {
        Command::Lambda(c) => ("lambda", c),
        Command::Front(c) => ("front", c),
        Command::Verify(c) => ("verify", c),
    };
    let mut cfg = config::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.solver.seed = Some(s);
    }
    if let Some(g) = common.grid_scale {
        cfg.solver.grid_scale = Some(g);
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.display().to_string());
    }
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let dir = PathBuf::from(cfg.output.clone().unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    let outcome = match cli.command {
        Command::Lambda(_) => commands::lambda(&cfg, &dir)?,
        Command::Front(_) => commands::front(&cfg, &dir)?,
        Command::Verify(_) => commands::verify(&cfg, &dir)?,
    };
    let mut files = outcome.files;
    files.push(output::manifest(&dir, name, &cfg)?);
    for f in &files {
        println!("{}", f.display());
    }
    if outcome.failures.is_empty() {
        Ok(files)
    } else {
        Err(CliError::Check(outcome.failures.join("; ")))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
