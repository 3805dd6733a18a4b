//! `spillover`: reproducible return and volatility spillover analysis driven
//! by a JSON configuration file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_ingest, cmd_rolling, cmd_static, cmd_stats, cmd_train};
use config::{Mode, RunConfig};

#[derive(Parser)]
#[command(
    name = "spillover",
    version,
    about = "Return and volatility spillover indices with optional covariance denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured analysis mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load prices, build return and volatility panels, write statistics.
    Ingest(CommonArgs),
    /// Recompute descriptive statistics from ingested panels.
    Stats(CommonArgs),
    /// Train the covariance denoiser on rolling windows.
    Train(CommonArgs),
    /// Full-sample spillover table.
    Static(CommonArgs),
    /// Rolling-window spillover series.
    Rolling(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Ingest(a)
            | Command::Stats(a)
            | Command::Train(a)
            | Command::Static(a)
            | Command::Rolling(a) => a,
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let args = cli.command.common();
    let mut config = RunConfig::load(&args.config)?;
    config.apply_overrides(args.mode, args.out.clone(), args.seed);
    config.validate()?;
    match &cli.command {
        Command::Ingest(_) => cmd_ingest(&config),
        Command::Stats(_) => cmd_stats(&config),
        Command::Train(_) => cmd_train(&config),
        Command::Static(_) => cmd_static(&config),
        Command::Rolling(_) => cmd_rolling(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
