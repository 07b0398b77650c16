//! Per-channel batch normalization over (batch, height, width).

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BnMode {
    /// Normalize with batch statistics and update the running estimates.
    Training,
    /// Normalize with the running estimates.
    Inference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormSpec {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNormSpec {
    /// `γ = 1`, `β = 0`, running mean 0 and variance 1.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Saved forward quantities for the backward pass.
#[derive(Clone, Debug)]
pub struct BnCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

impl BnCache {
    /// `x̂` before scale and shift.
    pub fn normalized(&self) -> &Tensor {
        &self.normalized
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

fn check_channels(input: &Tensor, spec: &BatchNormSpec) -> Result<()> {
    if input.channels() != spec.channels() {
        return Err(Error::Shape(format!(
            "batch norm has {} channels, input has {}",
            spec.channels(),
            input.channels()
        )));
    }
    Ok(())
}

/// Training-mode normalization; returns the output and the backward cache
/// and folds the batch statistics into the running estimates.
pub fn batch_norm_train(input: &Tensor, spec: &mut BatchNormSpec) -> Result<(Tensor, BnCache)> {
    check_channels(input, spec)?;
    let [batch, channels, _, _] = input.dims();
    let plane = input.plane();
    let m = batch * plane;
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "training-mode batch norm needs at least 2 values per channel, got {m}"
        )));
    }
    let mut out = Tensor::zeros(input.dims());
    let mut normalized = Tensor::zeros(input.dims());
    let mut inv_std = vec![0.0; channels];
    for c in 0..channels {
        let mean = (0..batch)
            .map(|n| input.channel(n, c).iter().sum::<f64>())
            .sum::<f64>()
            / m as f64;
        let var = (0..batch)
            .map(|n| input.channel(n, c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
            .sum::<f64>()
            / m as f64;
        let istd = 1.0 / (var + spec.epsilon).sqrt();
        inv_std[c] = istd;
        let (g, b) = (spec.gamma[c], spec.beta[c]);
        for n in 0..batch {
            let src = input.channel(n, c);
            let xhat = normalized.channel_mut(n, c);
            for (h, &v) in xhat.iter_mut().zip(src) {
                *h = (v - mean) * istd;
            }
            let xhat = normalized.channel(n, c);
            for (o, &h) in out.channel_mut(n, c).iter_mut().zip(xhat) {
                *o = g * h + b;
            }
        }
        let unbiased = var * m as f64 / (m - 1) as f64;
        spec.running_mean[c] = (1.0 - spec.momentum) * spec.running_mean[c] + spec.momentum * mean;
        spec.running_var[c] = (1.0 - spec.momentum) * spec.running_var[c] + spec.momentum * unbiased;
    }
    Ok((out, BnCache { normalized, inv_std }))
}

pub fn batch_norm_infer(input: &Tensor, spec: &BatchNormSpec) -> Result<Tensor> {
    check_channels(input, spec)?;
    let mut out = input.clone();
    for c in 0..input.channels() {
        let istd = 1.0 / (spec.running_var[c] + spec.epsilon).sqrt();
        let scale = spec.gamma[c] * istd;
        let shift = spec.beta[c] - spec.running_mean[c] * scale;
        for n in 0..input.batch() {
            for v in out.channel_mut(n, c) {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(out)
}

/// Gradients of training-mode normalization with respect to its input, `γ`
/// and `β`.
pub fn batch_norm_backward(spec: &BatchNormSpec, cache: &BnCache, grad_out: &Tensor) -> Result<(Tensor, BnGrads)> {
    cache.normalized.check_same_dims(grad_out)?;
    let [batch, channels, _, _] = grad_out.dims();
    let m = (batch * grad_out.plane()) as f64;
    let mut grad_in = Tensor::zeros(grad_out.dims());
    let mut grads = BnGrads {
        gamma: vec![0.0; channels],
        beta: vec![0.0; channels],
    };
    for c in 0..channels {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for n in 0..batch {
            for (&dy, &h) in grad_out.channel(n, c).iter().zip(cache.normalized.channel(n, c)) {
                sum_dy += dy;
                sum_dy_xhat += dy * h;
            }
        }
        grads.beta[c] = sum_dy;
        grads.gamma[c] = sum_dy_xhat;
        let k = spec.gamma[c] * cache.inv_std[c] / m;
        for n in 0..batch {
            let dst = grad_in.channel_mut(n, c);
            for ((d, &dy), &h) in dst
                .iter_mut()
                .zip(grad_out.channel(n, c))
                .zip(cache.normalized.channel(n, c))
            {
                *d = k * (m * dy - sum_dy - h * sum_dy_xhat);
            }
        }
    }
    Ok((grad_in, grads))
}
