use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::ExperimentConfig;
use error::CliError;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "fuzzy-runoff", version, about = "Fuzzy rainfall-runoff model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validity-index sweep over the rule count per algorithm and scheme.
    Sweep(Common),
    /// Fit one model per algorithm, scheme and normalization.
    Train(Common),
    /// Score trained models on the validation event.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory of model files (default: <out>/models).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Rank algorithms per scheme by validation RMSE.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Forecast report CSV files.
        reports: Vec<PathBuf>,
    },
    /// Write a synthetic training and validation event.
    Synth(Common),
}

fn effective_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Sweep(c) | Command::Train(c) | Command::Synth(c) => c,
        Command::Evaluate { common, .. } | Command::Compare { common, .. } => common,
    };
    let cfg = effective_config(common)?;
    let mut out = OutputDir::create(&common.out)?;
    match &cli.command {
        Command::Sweep(_) => commands::cmd_sweep(&cfg, &mut out),
        Command::Train(_) => commands::cmd_train(&cfg, &mut out),
        Command::Synth(_) => commands::cmd_synth(&cfg, &mut out),
        Command::Evaluate { models, .. } => {
            let dir = models.clone().unwrap_or_else(|| out.root().join("models"));
            commands::cmd_evaluate(&cfg, &dir, &mut out)
        }
        Command::Compare { reports, .. } => commands::cmd_compare(&cfg, reports, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
