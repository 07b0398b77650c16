//! On-disk formats: RFT1 tensors, WDN1 weights and windowed PGM previews.

mod rft1;
mod wdn1;

pub use rft1::{Dtype, RftTensor, RFT1_MAGIC};
pub use wdn1::{read_weights, write_weights, WeightHeader, WDN1_MAGIC};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::NetworkParams;

/// Display window for PGM previews, in HU.
pub const HU_WINDOW: (f64, f64) = (-160.0, 240.0);

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    let t = RftTensor::new(vec![image.rows(), image.cols()], Dtype::F64, image.data().to_vec())?;
    let mut w = create(path)?;
    t.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: &Path) -> Result<Image> {
    let t = RftTensor::read_from(&mut open(path)?)?;
    match t.dims[..] {
        [rows, cols] => Image::new(rows, cols, t.data),
        _ => Err(Error::Format(format!("{} holds a rank-{} tensor, not an image", path.display(), t.dims.len()))),
    }
}

pub fn save_weights(path: &Path, params: &NetworkParams, extra: serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    write_weights(&mut w, params, extra)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<(NetworkParams, WeightHeader)> {
    read_weights(&mut open(path)?)
}

/// 16-bit binary PGM: `window` maps linearly onto `[0, 65535]`, values
/// outside are clamped.
pub fn encode_pgm(image: &Image, window: (f64, f64)) -> Result<Vec<u8>> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty window ({lo}, {hi})")));
    }
    let mut out = format!("P5\n{} {}\n65535\n", image.cols(), image.rows()).into_bytes();
    for &v in image.data() {
        let level = ((v - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend(level.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, image_hu: &Image) -> Result<()> {
    let bytes = encode_pgm(image_hu, HU_WINDOW)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
