use crate::error::{Error, Result};
use crate::nn::NetworkGrads;

use super::TrainConfig;

/// Log-linear interpolation between `start` (t = 0) and `end` (t = 1).
pub fn lr_at_progress(t: f64, start: f64, end: f64) -> f64 {
    start * (end / start).powf(t)
}

/// Rate for `epoch`: `lr_start` at the first epoch, `lr_end` at the last.
pub fn lr_at(epoch: usize, config: &TrainConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!("epoch {epoch} outside 0..{}", config.epochs)));
    }
    if config.epochs == 1 {
        return Ok(config.lr_start);
    }
    let t = epoch as f64 / (config.epochs - 1) as f64;
    Ok(lr_at_progress(t, config.lr_start, config.lr_end))
}

pub fn clip_values(values: &mut [f64], theta: f64) {
    for v in values {
        *v = v.clamp(-theta, theta);
    }
}

/// Clamps every gradient component to `[−θ, θ]`.
pub fn clip_gradients(grads: &mut NetworkGrads, theta: f64) -> Result<()> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("clip bound must be > 0, got {theta}")));
    }
    for g in grads.flat_mut() {
        clip_values(g, theta);
    }
    Ok(())
}
