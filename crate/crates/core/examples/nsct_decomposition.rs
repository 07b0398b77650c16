//! Decomposes a synthetic slice into its fifteen bands, prints per-band
//! energy, checks perfect reconstruction and writes band previews.
//!
//! cargo run --release --example nsct_decomposition -- [out_dir]

use std::path::PathBuf;

use ctdenoise::io::encode_pgm;
use ctdenoise::nsct::{inverse, FilterBank, NsctPlan};
use ctdenoise::Image;

fn main() -> ctdenoise::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/nsct_decomposition".into()));
    std::fs::create_dir_all(&out).map_err(|e| ctdenoise::Error::Config(e.to_string()))?;

    // a disk with a rim of lines at several angles
    let side = 128;
    let image = Image::from_fn(side, side, |r, c| {
        let (y, x) = (r as f64 - 64.0, c as f64 - 64.0);
        let disk = if x.hypot(y) < 40.0 { 1.0 } else { 0.0 };
        let lines = (0.35 * (x * 0.8 + y * 0.6)).sin() * 0.2;
        disk + lines
    });

    let bank = FilterBank::standard();
    let plan = NsctPlan::new(&bank, side)?;
    let coeffs = plan.forward(&image)?;
    let total: f64 = coeffs.bands().iter().map(|b| b.energy()).sum();
    let mut index = 0;
    for (level, &d) in bank.directions_per_level().iter().enumerate() {
        for k in 0..d {
            let band = coeffs.band(index);
            println!("level {} direction {k}/{d}: {:5.2}% of energy", level + 1, 100.0 * band.energy() / total);
            let peak = band.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            let bytes = encode_pgm(band, (-peak, peak))?;
            std::fs::write(out.join(format!("band_{index:02}.pgm")), bytes).map_err(|e| ctdenoise::Error::Config(e.to_string()))?;
            index += 1;
        }
    }
    println!("lowpass: {:5.2}% of energy", 100.0 * coeffs.lowpass().energy() / total);

    let back = inverse(&coeffs, &bank)?;
    println!("relative reconstruction error {:.2e}", back.relative_l2_error(&image)?);
    println!("previews in {}", out.display());
    Ok(())
}
