//! Config-driven experiment runner: `run`, `compare` and `verify`.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use artifacts::{write_atomic, RunArtifacts};
pub use commands::{
    cmd_compare, cmd_run, cmd_verify, execute, load_config, merged_csv, render_verify, verify, Check, CliError,
    Experiment, Overrides, RunReport, VerifyReport,
};
pub use config::{BoxSpec, DataSource, ExperimentConfig, FamilySpec, InitSpec, MetricsSpec, TargetSpec};

#[derive(Debug, Parser)]
#[command(name = "boostvi", version, about = "Boosting variational inference over truncated Gaussian mixtures")]
pub struct Cli {
    /// Override `run.seed` in every config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override `run.output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write trace, summary and resolved config.
    Run { config: PathBuf },
    /// Run configs that differ only in their solver block and merge the traces.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Print the family constants and run quadrature spot-checks.
    Verify {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Worker count from `BOOSTVI_THREADS`; results do not depend on it.
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BOOSTVI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError {
            code: 2,
            message: format!("BOOSTVI_THREADS must be a positive integer, got `{v}`"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Run { config } => cmd_run(config, &overrides).map(|_| 0),
        Command::Compare { configs } => cmd_compare(configs, &overrides).map(|_| 0),
        Command::Verify { config, json } => cmd_verify(config, &overrides, *json).map(|ok| if ok { 0 } else { 1 }),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
