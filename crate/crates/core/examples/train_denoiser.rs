//! Trains the wavelet-domain network on simulated quarter/routine dose
//! pairs and compares it with the noisy input and a shrinkage baseline.
//!
//! cargo run --release --example train_denoiser -- [train] [test] [iterations] [patch]

use std::time::Instant;

use ctdenoise::cli::ShrinkageConfig;
use ctdenoise::ctsim::{simulate_slice, SimulationConfig};
use ctdenoise::metrics::MetricReport;
use ctdenoise::nn::{Architecture, Engine, Variant};
use ctdenoise::nsct::{FilterBank, NsctPlan};
use ctdenoise::pipeline::{denoise_slice, mu_to_units, shrinkage_slice, tune_shrinkage, units_to_hu};
use ctdenoise::train::{mean_report, PairedSlices, TrainConfig, Trainer};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).map(|s| s.parse().expect("integer argument")).unwrap_or(default)
}

fn simulate(sim: &SimulationConfig, seed: u64, count: usize) -> ctdenoise::Result<PairedSlices> {
    let (mut noisy, mut clean) = (Vec::new(), Vec::new());
    for i in 0..count {
        let (_, pair) = simulate_slice(sim, seed, i)?;
        noisy.push(mu_to_units(&pair.quarter));
        clean.push(mu_to_units(&pair.routine));
    }
    PairedSlices::new(noisy, clean)
}

fn main() -> ctdenoise::Result<()> {
    let (n_train, n_test, iterations, patch) = (arg(1, 64), arg(2, 8), arg(3, 2000), arg(4, 32));
    let sim = SimulationConfig::default();
    let start = Instant::now();
    let train = simulate(&sim, 1, n_train)?;
    let test = simulate(&sim, 2, n_test)?;
    println!("simulated {n_train}+{n_test} slices in {:.1?}", start.elapsed());

    let epochs = TrainConfig::desk_scale().epochs;
    let config = TrainConfig {
        iterations_per_epoch: iterations.div_ceil(epochs),
        patch_side: patch,
        subset_size: n_train,
        ..TrainConfig::desk_scale()
    };
    let arch = Architecture::new(32, 3, Variant::WaveletFull);
    let bank = FilterBank::standard();
    let start = Instant::now();
    let mut trainer = Trainer::new(config, &arch, &bank, &train, &test)?;
    trainer.run(|_, record| {
        if let Some(r) = record {
            println!(
                "epoch {:>3}  loss {:.3e}  psnr {:.2} dB  nrmse {:.4}  lr {:.2e}  [{:.0?}]",
                r.epoch, r.loss, r.psnr, r.nrmse, r.lr, start.elapsed()
            );
        }
        Ok(())
    })?;

    let engine = Engine::new(trainer.config().precision);
    let plan = NsctPlan::new(&bank, sim.side)?;
    let tau = tune_shrinkage(&plan, &train.noisy[..8.min(n_train)], &train.clean[..8.min(n_train)], &ShrinkageConfig::default().candidates)?;
    let reports = |f: &dyn Fn(&ctdenoise::Image) -> ctdenoise::Result<ctdenoise::Image>| {
        mean_report(test.noisy.iter().zip(&test.clean).map(|(n, c)| {
            MetricReport::compute(&units_to_hu(c), &units_to_hu(&f(n)?))
        }))
    };
    let noisy = reports(&|n| Ok(n.clone()))?;
    let shrink = reports(&|n| shrinkage_slice(&plan, n, tau))?;
    let net = reports(&|n| denoise_slice(&engine, trainer.params(), trainer.representation(), n))?;
    println!("noisy     psnr {:.2} dB  nrmse {:.4}", noisy.psnr, noisy.nrmse);
    println!("shrinkage psnr {:.2} dB  nrmse {:.4}  (tau {tau})", shrink.psnr, shrink.nrmse);
    println!("network   psnr {:.2} dB  nrmse {:.4}", net.psnr, net.nrmse);
    Ok(())
}
