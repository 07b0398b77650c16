use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ctsim::SimulationConfig;
use crate::error::{Error, Result};
use crate::nn::{Architecture, Variant};
use crate::train::TrainConfig;

/// Number of simulated slices per split. The test split doubles as the
/// validation set tracked during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Split {
    pub train: usize,
    pub test: usize,
}

impl Default for Split {
    fn default() -> Self {
        Self { train: 64, test: 8 }
    }
}

/// Soft-threshold baseline: the threshold (network units) is picked from
/// `candidates` on the first `tuning_slices` training slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageConfig {
    pub candidates: Vec<f64>,
    pub tuning_slices: usize,
}

impl Default for ShrinkageConfig {
    fn default() -> Self {
        Self {
            candidates: vec![0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.06],
            tuning_slices: 8,
        }
    }
}

/// Shared budget for the four-variant comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub variants: Vec<Variant>,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            epochs: 10,
            iterations_per_epoch: 50,
        }
    }
}

fn default_arch() -> Architecture {
    Architecture::new(32, 3, Variant::WaveletFull)
}

/// Everything a command needs. `seed` seeds the simulator and the trainer;
/// it overrides `train.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Written by `simulate`, read by every other command.
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Weights used by `denoise`; `evaluate` scores it together with
    /// `extra_checkpoints`. Relative to the working directory.
    pub checkpoint: Option<PathBuf>,
    pub extra_checkpoints: Vec<PathBuf>,
    /// Training checkpoint to continue from.
    pub resume: Option<PathBuf>,
    pub split: Split,
    pub simulation: SimulationConfig,
    #[serde(default = "default_arch")]
    pub arch: Architecture,
    pub train: TrainConfig,
    pub shrinkage: ShrinkageConfig,
    pub ablation: AblationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            checkpoint: None,
            extra_checkpoints: Vec::new(),
            resume: None,
            split: Split::default(),
            simulation: SimulationConfig::default(),
            arch: default_arch(),
            train: TrainConfig::desk_scale(),
            shrinkage: ShrinkageConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides and checks the result.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        self.train.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        if self.split.train == 0 || self.split.test == 0 {
            return Err(Error::Config("both splits need at least one slice".into()));
        }
        if self.shrinkage.candidates.is_empty() || self.shrinkage.candidates.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("shrinkage candidates must be a nonempty list of thresholds >= 0".into()));
        }
        if self.ablation.variants.is_empty() || self.ablation.epochs == 0 || self.ablation.iterations_per_epoch == 0 {
            return Err(Error::Config("ablation needs variants and a nonzero budget".into()));
        }
        Ok(())
    }

    /// The checkpoint `denoise` reads: the configured one or the file `train`
    /// writes into the output directory.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join(super::CHECKPOINT_FILE))
    }
}

pub(crate) fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}
