//! Analytic backward passes against central finite differences.

mod common;

use common::{network_fd_check, random_params, random_tensor, relative_error};
use ctdenoise::nn::{
    batch_norm_backward, batch_norm_train, conv2d, conv2d_backward, Architecture, BatchNormSpec, ConvBnUnit, ConvSpec,
    Engine, Precision, Tensor, Variant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOLERANCE: f64 = 1e-4;

/// `Σ y·r`: a linear probe whose gradient with respect to `y` is `r`.
fn probe(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn central(mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(STEP) - f(-STEP)) / (2.0 * STEP)
}

fn assert_close(what: &str, analytic: f64, numeric: f64) {
    let rel = relative_error(analytic, numeric, 1e-6);
    assert!(rel <= TOLERANCE, "{what}: analytic {analytic:e} numeric {numeric:e} rel {rel:e}");
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_tensor([1, 2, 8, 8], &mut rng);
    let mut spec = ConvSpec::zeros(3, 2);
    spec.weight.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    spec.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
    let r = random_tensor([1, 3, 8, 8], &mut rng);
    let (gx, grads) = conv2d_backward(&x, &spec, &r, Precision::F64).unwrap();

    for i in 0..spec.weight.len() {
        let numeric = central(|d| {
            let mut s = spec.clone();
            s.weight[i] += d;
            probe(&conv2d(&x, &s, Precision::F64).unwrap(), &r)
        });
        assert_close(&format!("weight[{i}]"), grads.weight[i], numeric);
    }
    for i in 0..spec.bias.len() {
        let numeric = central(|d| {
            let mut s = spec.clone();
            s.bias[i] += d;
            probe(&conv2d(&x, &s, Precision::F64).unwrap(), &r)
        });
        assert_close(&format!("bias[{i}]"), grads.bias[i], numeric);
    }
    for i in 0..x.len() {
        let numeric = central(|d| {
            let mut xp = x.clone();
            xp.data_mut()[i] += d;
            probe(&conv2d(&xp, &spec, Precision::F64).unwrap(), &r)
        });
        assert_close(&format!("input[{i}]"), gx.data()[i], numeric);
    }
}

#[test]
fn batch_norm_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_tensor([2, 3, 4, 4], &mut rng);
    let mut spec = BatchNormSpec::new(3);
    spec.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
    spec.beta.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    let r = random_tensor(x.dims(), &mut rng);
    let (_, cache) = batch_norm_train(&x, &mut spec.clone()).unwrap();
    let (gx, grads) = batch_norm_backward(&spec, &cache, &r).unwrap();
    let eval = |s: &BatchNormSpec, x: &Tensor| probe(&batch_norm_train(x, &mut s.clone()).unwrap().0, &r);

    for i in 0..x.len() {
        let numeric = central(|d| {
            let mut xp = x.clone();
            xp.data_mut()[i] += d;
            eval(&spec, &xp)
        });
        assert_close(&format!("input[{i}]"), gx.data()[i], numeric);
    }
    for c in 0..3 {
        let numeric = central(|d| {
            let mut s = spec.clone();
            s.gamma[c] += d;
            eval(&s, &x)
        });
        assert_close(&format!("gamma[{c}]"), grads.gamma[c], numeric);
        let numeric = central(|d| {
            let mut s = spec.clone();
            s.beta[c] += d;
            eval(&s, &x)
        });
        assert_close(&format!("beta[{c}]"), grads.beta[c], numeric);
    }
}

fn random_units(channels: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<ConvBnUnit> {
    (0..count)
        .map(|_| {
            let mut conv = ConvSpec::zeros(channels, channels);
            conv.weight.iter_mut().for_each(|w| *w = rng.random_range(-0.3..0.3));
            conv.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
            let mut bn = BatchNormSpec::new(channels);
            bn.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.8..1.2));
            bn.beta.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
            ConvBnUnit { conv, bn }
        })
        .collect()
}

#[test]
fn residual_block_gradients_match_finite_differences() {
    let engine = Engine::new(Precision::F64);
    for bypass in [true, false] {
        let mut rng = ChaCha8Rng::seed_from_u64(13 + bypass as u64);
        let units = random_units(4, 3, &mut rng);
        let x = random_tensor([2, 4, 6, 6], &mut rng);
        let r = random_tensor(x.dims(), &mut rng);
        let eval = |units: &[ConvBnUnit], x: &Tensor| {
            let (y, cache) = engine.residual_block(&mut units.to_vec(), x, bypass).unwrap();
            (probe(&y, &r), cache.relu_pattern())
        };
        let (_, cache) = engine.residual_block(&mut units.clone(), &x, bypass).unwrap();
        let base = cache.relu_pattern();
        let (gx, grads) = engine.residual_block_backward(&units, &cache, &r, bypass).unwrap();

        let mut checked = 0;
        let mut check = |what: String, analytic: f64, f: &dyn Fn(f64) -> (f64, Vec<bool>)| {
            let (plus, pp) = f(STEP);
            let (minus, pm) = f(-STEP);
            if pp != base || pm != base {
                return;
            }
            assert_close(&what, analytic, (plus - minus) / (2.0 * STEP));
            checked += 1;
        };
        for u in 0..units.len() {
            for i in (0..units[u].conv.weight.len()).step_by(7) {
                check(format!("unit{u}.weight[{i}]"), grads[u].conv.weight[i], &|d| {
                    let mut p = units.clone();
                    p[u].conv.weight[i] += d;
                    eval(&p, &x)
                });
            }
            for c in 0..4 {
                check(format!("unit{u}.gamma[{c}]"), grads[u].bn.gamma[c], &|d| {
                    let mut p = units.clone();
                    p[u].bn.gamma[c] += d;
                    eval(&p, &x)
                });
                check(format!("unit{u}.beta[{c}]"), grads[u].bn.beta[c], &|d| {
                    let mut p = units.clone();
                    p[u].bn.beta[c] += d;
                    eval(&p, &x)
                });
            }
        }
        for i in (0..x.len()).step_by(5) {
            check(format!("input[{i}]"), gx.data()[i], &|d| {
                let mut xp = x.clone();
                xp.data_mut()[i] += d;
                eval(&units, &xp)
            });
        }
        assert!(checked > 50, "only {checked} kink-free samples");
    }
}

#[test]
fn full_network_gradients_with_weight_decay() {
    for variant in Variant::ALL {
        let arch = Architecture::new(8, 2, variant);
        let params = random_params(&arch, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let io = arch.io_channels();
        let x = random_tensor([2, io, 16, 16], &mut rng);
        let target = random_tensor([2, io, 16, 16], &mut rng);
        let report = network_fd_check(&params, &x, &target, 1e-4, 200, STEP, 23);
        eprintln!("{variant}: {} checked, {} kink samples redrawn", report.checked, report.skipped_kinks);
        assert!(
            report.max_rel <= TOLERANCE,
            "{variant}: max rel {:e} at {}",
            report.max_rel,
            report.worst
        );
    }
}

#[test]
fn weight_decay_term_alone_matches_finite_differences() {
    // the data term does not depend on λ, so differences isolate the penalty
    let arch = Architecture::new(4, 1, Variant::WaveletFull);
    let params = random_params(&arch, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let x = random_tensor([2, 15, 8, 8], &mut rng);
    let target = random_tensor([2, 15, 8, 8], &mut rng);
    let engine = Engine::default();
    let (l0, g0) = engine.loss_and_grad(&mut params.clone(), &x, &target, 0.0).unwrap();
    let (l1, g1) = engine.loss_and_grad(&mut params.clone(), &x, &target, 1e-4).unwrap();
    assert!((l1 - l0 - 1e-4 * params.weight_energy()).abs() < 1e-12);
    let w = params.output.weight[5];
    let (a, b) = (&g0.output.weight[5], &g1.output.weight[5]);
    assert!((b - a - 2e-4 * w).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn batch_norm_normalizes_each_channel(seed in any::<u64>(), scale in 0.5f64..50.0, shift in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = random_tensor([16, 3, 5, 5], &mut rng);
        x.data_mut().iter_mut().for_each(|v| *v = *v * scale + shift);
        let mut spec = BatchNormSpec::new(3);
        let (_, cache) = batch_norm_train(&x, &mut spec).unwrap();
        let xhat = cache.normalized();
        let m = (16 * 25) as f64;
        for c in 0..3 {
            let values: Vec<f64> = (0..16).flat_map(|n| xhat.channel(n, c).to_vec()).collect();
            let mean = values.iter().sum::<f64>() / m;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
            prop_assert!(mean.abs() <= 1e-6);
            prop_assert!((var - 1.0).abs() <= 1e-4);
        }
    }
}
