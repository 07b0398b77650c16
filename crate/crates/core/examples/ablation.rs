//! Trains the four network variants under one short budget and prints the
//! final validation PSNR of each.
//!
//! cargo run --release --example ablation -- [work_dir] [epochs] [iterations_per_epoch]

use std::path::PathBuf;

use ctdenoise::cli::{cmd_ablation, cmd_simulate, AblationConfig, ExperimentConfig, Split};

fn main() -> ctdenoise::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "target/ablation".into()));
    let epochs = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(6);
    let iterations = args.next().map(|s| s.parse().expect("iterations")).unwrap_or(40);
    let config = ExperimentConfig {
        seed: 4,
        dataset_dir: root.join("data"),
        output_dir: root.join("run"),
        split: Split { train: 16, test: 4 },
        ablation: AblationConfig {
            epochs,
            iterations_per_epoch: iterations,
            ..AblationConfig::default()
        },
        ..ExperimentConfig::default()
    }
    .resolve(None, None)?;
    cmd_simulate(
        &ExperimentConfig {
            output_dir: config.dataset_dir.clone(),
            ..config.clone()
        },
        |_| {},
    )?;
    let summary = cmd_ablation(&config, |line| println!("  {line}"))?;
    println!("noisy input {:.2} dB", summary.noisy_psnr);
    for v in &summary.variants {
        println!("{:<20} final {:.2} dB  best {:.2} dB  curve {}", v.variant, v.final_psnr, v.best_psnr, v.curve.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary.observations)?);
    Ok(())
}
