//! Simulates one routine/quarter dose pair from a random body phantom and
//! writes windowed previews.
//!
//! cargo run --release --example simulate_pair -- [out_dir] [seed]

use std::path::PathBuf;
use std::time::Instant;

use ctdenoise::ctsim::{generate_pair, image_to_hu, Geometry, Phantom, DEFAULT_DOSE, MU_WATER};
use ctdenoise::io::write_pgm;
use ctdenoise::metrics::MetricReport;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ctdenoise::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/simulate_pair".into()));
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    std::fs::create_dir_all(&out).map_err(|e| ctdenoise::Error::Config(e.to_string()))?;

    let geom = Geometry::for_grid(256, 1.5, 360);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phantom = Phantom::random_body(&mut rng, geom.grid_half_width(), true)?;
    let start = Instant::now();
    let pair = generate_pair(&phantom, &geom, DEFAULT_DOSE, seed)?;
    println!("simulated in {:.2?}", start.elapsed());

    let truth = image_to_hu(&pair.truth, MU_WATER);
    for (name, image) in [("truth", &pair.truth), ("routine", &pair.routine), ("quarter", &pair.quarter)] {
        let hu = image_to_hu(image, MU_WATER);
        write_pgm(&out.join(format!("{name}.pgm")), &hu)?;
        if name != "truth" {
            let m = MetricReport::compute(&truth, &hu)?;
            println!("{name:>8}: psnr {:.2} dB, nrmse {:.4}, rmse {:.1} HU", m.psnr, m.nrmse, m.rmse);
        }
    }
    let routine = image_to_hu(&pair.routine, MU_WATER);
    let q = MetricReport::compute(&routine, &image_to_hu(&pair.quarter, MU_WATER))?;
    println!("quarter vs routine: psnr {:.2} dB", q.psnr);
    println!("previews in {}", out.display());
    Ok(())
}
