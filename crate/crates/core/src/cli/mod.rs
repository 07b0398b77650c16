//! Command-line surface: `simulate`, `train`, `denoise`, `evaluate` and
//! `ablation`, all driven by one JSON [`ExperimentConfig`].

mod commands;
mod config;
mod dataset;

pub use commands::{
    cmd_ablation, cmd_denoise, cmd_evaluate, cmd_simulate, cmd_train, train_into, AblationObservations,
    AblationSummary, DenoiseSummary, EvaluateSummary, EvaluationRow, MethodSummary, SimulateSummary, TrainSummary,
    VariantOutcome,
};
pub use config::{AblationConfig, ExperimentConfig, ShrinkageConfig, Split};
pub use dataset::{load_split, write_dataset, DoseRecord, LoadedSplit, Manifest, SliceRecord, MANIFEST_FILE};

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.wdn";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const ABLATION_DIR: &str = "ablation";

#[derive(Debug, Parser)]
#[command(name = "ctdenoise", version, about = "Wavelet-domain CNN denoising for simulated low-dose CT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppresses progress lines.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate paired routine/quarter-dose slices into the output directory.
    Simulate,
    /// Train a network on the dataset; writes a checkpoint and a log.
    Train,
    /// Denoise the test slices with a checkpoint.
    Denoise,
    /// Score noisy input, shrinkage and checkpoints on the test slices.
    Evaluate,
    /// Train all four variants under one budget and compare them.
    Ablation,
}

impl Cli {
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        base.resolve(self.seed, self.out.clone())
    }
}

/// Runs one command and returns its summary as JSON.
pub fn run(cli: &Cli) -> Result<serde_json::Value> {
    let config = cli.experiment()?;
    let quiet = cli.quiet;
    let progress = |line: &str| {
        if !quiet {
            eprintln!("{line}");
        }
    };
    Ok(match cli.command {
        Command::Simulate => serde_json::to_value(cmd_simulate(&config, progress)?)?,
        Command::Train => serde_json::to_value(cmd_train(&config, progress)?)?,
        Command::Denoise => serde_json::to_value(cmd_denoise(&config, progress)?)?,
        Command::Evaluate => serde_json::to_value(cmd_evaluate(&config, progress)?)?,
        Command::Ablation => serde_json::to_value(cmd_ablation(&config, progress)?)?,
    })
}

/// The single-line JSON object printed for a failed command.
pub fn error_line(error: &Error) -> String {
    serde_json::json!({"error": error.kind(), "message": error.to_string()}).to_string()
}
