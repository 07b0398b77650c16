//! Shared test oracles. Everything here is deliberately independent of the
//! code paths it checks: losses are recomputed from raw outputs and gradients
//! come from central differences.
#![allow(dead_code)]

use ctdenoise::nn::{Architecture, Engine, NetworkParams, ParamKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Random conv weights, biases and BN affine parameters.
pub fn random_params(arch: &Architecture, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::zeros(arch).unwrap();
    for slot in params.tensors_mut() {
        for v in slot.values.iter_mut() {
            *v = match slot.kind {
                ParamKind::ConvWeight => rng.random_range(-0.3..0.3),
                ParamKind::ConvBias | ParamKind::BnBeta => rng.random_range(-0.1..0.1),
                ParamKind::BnGamma => rng.random_range(0.8..1.2),
                ParamKind::RunningMean | ParamKind::RunningVar => *v,
            };
        }
    }
    params
}

/// Loss recomputed from the raw network output: mean squared error plus
/// `λ·Σ W²` summed directly over conv weight tensors.
pub fn oracle_loss(params: &NetworkParams, x: &Tensor, target: &Tensor, lambda: f64) -> (f64, Vec<bool>) {
    let mut p = params.clone();
    let (y, cache) = Engine::default().forward_train(&mut p, x).unwrap();
    let n = y.len() as f64;
    let data: f64 = y.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let mut penalty = 0.0;
    for t in params.tensors() {
        if t.kind == ParamKind::ConvWeight {
            penalty += t.values.iter().map(|w| w * w).sum::<f64>();
        }
    }
    (data + lambda * penalty, cache.relu_pattern())
}

pub struct FdReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Central-difference check of `count` uniformly sampled trainable scalars.
///
/// A sample whose `±h` evaluations change any ReLU sign is not differentiable
/// at the scale of `h`; such samples are skipped and redrawn.
pub fn network_fd_check(
    params: &NetworkParams,
    x: &Tensor,
    target: &Tensor,
    lambda: f64,
    count: usize,
    h: f64,
    seed: u64,
) -> FdReport {
    let mut analytic_params = params.clone();
    let (_, grads) = Engine::default()
        .loss_and_grad(&mut analytic_params, x, target, lambda)
        .unwrap();
    let flat: Vec<Vec<f64>> = grads.flat().iter().map(|g| g.to_vec()).collect();
    let names: Vec<String> = params
        .tensors()
        .into_iter()
        .filter(|t| t.kind.trainable())
        .map(|t| t.name)
        .collect();
    assert_eq!(flat.len(), names.len());
    let total: usize = flat.iter().map(|g| g.len()).sum();
    let (_, base_pattern) = oracle_loss(params, x, target, lambda);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport { checked: 0, skipped_kinks: 0, max_rel: 0.0, worst: String::new() };
    let mut attempts = 0;
    while report.checked < count {
        attempts += 1;
        assert!(attempts < 50 * count, "too many kink crossings");
        let mut flat_index = rng.random_range(0..total);
        let mut tensor = 0;
        while flat_index >= flat[tensor].len() {
            flat_index -= flat[tensor].len();
            tensor += 1;
        }
        let eval = |delta: f64| {
            let mut p = params.clone();
            let mut slots = p.trainable_mut();
            slots[tensor].values[flat_index] += delta;
            drop(slots);
            oracle_loss(&p, x, target, lambda)
        };
        let (plus, pattern_plus) = eval(h);
        let (minus, pattern_minus) = eval(-h);
        if pattern_plus != base_pattern || pattern_minus != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = flat[tensor][flat_index];
        let rel = relative_error(analytic, numeric, 1e-6);
        if rel > report.max_rel {
            report.max_rel = rel;
            report.worst = format!("{}[{flat_index}]: analytic {analytic:e} numeric {numeric:e}", names[tensor]);
        }
        report.checked += 1;
    }
    report
}
