//! Deterministic CLI for geometry-aware resampling and benchmarking.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CommandError, RunContext};
use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "gicaps",
    version,
    about = "Geometry-aware resampling for imbalanced multi-class datasets"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured Gaussian blobs into a CSV dataset.
    Generate,
    /// Rebalance the configured dataset with one method.
    Resample,
    /// Cross-validate the configured methods and write metric reports.
    Benchmark,
    /// Post-resampling PCA nearest-neighbor margin between two classes.
    Margin,
    /// Dump original + synthetic points with provenance columns.
    DumpPoints,
}

fn load_context(cli: &Cli) -> Result<RunContext, ConfigError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    // flags win over the file
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    RunContext::new(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let ctx = match load_context(&cli) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Generate => commands::cmd_generate(&ctx),
        Command::Resample => commands::cmd_resample(&ctx),
        Command::Benchmark => commands::cmd_benchmark(&ctx),
        Command::Margin => commands::cmd_margin(&ctx),
        Command::DumpPoints => commands::cmd_dump_points(&ctx),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CommandError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CommandError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
