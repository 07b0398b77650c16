use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Precision, DEFAULT_INIT_SIGMA};

/// Optimisation settings. Defaults follow the published schedule; the
/// subset and epoch sizes are meant to be scaled to the dataset at hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_start: f64,
    pub lr_end: f64,
    /// Absolute bound on every gradient component.
    pub clip_theta: f64,
    pub batch_size: usize,
    pub patch_side: usize,
    /// Weight on `Σ‖W‖²` over conv weights.
    pub lambda: f64,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    /// Slices whose coefficients are resident at a time.
    pub subset_size: usize,
    /// Epochs between subset re-draws.
    pub subset_interval: usize,
    pub seed: u64,
    pub augment: bool,
    pub init_sigma: f64,
    /// Arithmetic of the convolution products.
    pub precision: Precision,
    /// Validate every this many epochs (the final epoch always validates).
    pub eval_every: usize,
    /// Checkpoint every this many epochs; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_start: 1e-2,
            lr_end: 1e-5,
            clip_theta: 1e-3,
            batch_size: 10,
            patch_side: 55,
            lambda: 1e-4,
            epochs: 100,
            iterations_per_epoch: 100,
            subset_size: 200,
            subset_interval: 50,
            seed: 0,
            augment: true,
            init_sigma: DEFAULT_INIT_SIGMA,
            precision: Precision::F32,
            eval_every: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Settings for a 2000-iteration CPU run on a few dozen slices. The loss
    /// is a per-element mean, so the published rate and clip bound would move
    /// weights by at most 1e-5 per step; both are raised and the initial
    /// weights shrunk so the output layer starts near zero.
    pub fn desk_scale() -> Self {
        Self {
            lr_start: 0.1,
            lr_end: 1e-3,
            clip_theta: 1.0,
            patch_side: 32,
            epochs: 20,
            iterations_per_epoch: 100,
            subset_size: 64,
            subset_interval: 10,
            init_sigma: 1e-3,
            eval_every: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return fail(format!("need lr_start >= lr_end > 0, got {} and {}", self.lr_start, self.lr_end));
        }
        if !(self.clip_theta > 0.0) {
            return fail(format!("clip_theta must be > 0, got {}", self.clip_theta));
        }
        if self.patch_side < 8 {
            return fail(format!("patch_side must be >= 8, got {}", self.patch_side));
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be >= 2 for batch statistics, got {}", self.batch_size));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return fail(format!("init_sigma must be > 0, got {}", self.init_sigma));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("iterations_per_epoch", self.iterations_per_epoch),
            ("subset_size", self.subset_size),
            ("subset_interval", self.subset_interval),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs * self.iterations_per_epoch
    }
}
