//! Simulates a small dataset, trains briefly, then denoises the test slices
//! and scores noisy input, shrinkage and the network, as the `simulate`,
//! `train`, `denoise` and `evaluate` commands do.
//!
//! cargo run --release --example denoise_and_evaluate -- [work_dir]

use std::path::PathBuf;

use ctdenoise::cli::{cmd_denoise, cmd_evaluate, cmd_simulate, cmd_train, ExperimentConfig, Split};
use ctdenoise::train::TrainConfig;

fn main() -> ctdenoise::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/denoise_and_evaluate".into()));
    let config = ExperimentConfig {
        seed: 3,
        dataset_dir: root.join("data"),
        output_dir: root.join("run"),
        split: Split { train: 16, test: 4 },
        train: TrainConfig {
            epochs: 10,
            iterations_per_epoch: 40,
            subset_size: 16,
            ..TrainConfig::desk_scale()
        },
        ..ExperimentConfig::default()
    }
    .resolve(None, None)?;
    let quiet = |_: &str| {};

    let simulated = cmd_simulate(
        &ExperimentConfig {
            output_dir: config.dataset_dir.clone(),
            ..config.clone()
        },
        quiet,
    )?;
    println!("simulated {} files into {}", simulated.files, simulated.dir.display());

    let trained = cmd_train(&config, |line| println!("  {line}"))?;
    println!("checkpoint {}", trained.checkpoint.display());

    let denoised = cmd_denoise(&config, quiet)?;
    println!(
        "denoised {} slices into {}: {:.2} dB -> {:.2} dB",
        denoised.slices,
        denoised.dir.display(),
        denoised.mean_input_psnr,
        denoised.mean_output_psnr
    );

    let evaluation = cmd_evaluate(&config, quiet)?;
    for m in &evaluation.methods {
        println!("{:<40} psnr {:6.2} dB  nrmse {:.4}", m.method, m.psnr, m.nrmse);
    }
    println!("per-slice rows in {}", evaluation.csv.display());
    Ok(())
}
