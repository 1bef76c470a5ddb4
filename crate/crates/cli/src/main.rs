//! `tomoseg`: generate synthetic tomographic datasets, train boundary
//! models, predict surfaces, and evaluate them.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "tomoseg", version, about = "Layer-boundary reconstruction from tomographic slice sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Generate(CommonArgs),
    /// Train a model and write a checkpoint plus a loss log.
    Train(CommonArgs),
    /// Write per-sequence surface predictions as CSV.
    Predict(CommonArgs),
    /// Evaluate a checkpoint against ground truth.
    Eval(CommonArgs),
    /// Train and evaluate every ablation mode, then print a comparison.
    Ablate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured ablation mode.
    #[arg(long)]
    mode: Option<String>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = mode.clone();
            cfg.mode()?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => commands::cmd_generate(&args.load()?),
        Command::Train(args) => commands::cmd_train(&args.load()?),
        Command::Predict(args) => commands::cmd_predict(&args.load()?),
        Command::Eval(args) => commands::cmd_eval(&args.load()?),
        Command::Ablate(args) => commands::cmd_ablate(&args.load()?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
