//! Fidelity metrics of a test image against a reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

fn check_dims(reference: &Image, test: &Image) -> Result<()> {
    if reference.dims() != test.dims() {
        return Err(Error::Shape(format!(
            "reference is {:?}, test is {:?}",
            reference.dims(),
            test.dims()
        )));
    }
    Ok(())
}

/// Mean squared difference over all pixels.
pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    check_dims(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `10·log10(max² / mse)`; `+∞` when `mse == 0`.
pub fn psnr_from_mse(max: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (max * max / mse).log10()
}

/// PSNR with the peak taken as the reference maximum.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    Ok(psnr_from_mse(reference.max(), mse(reference, test)?))
}

/// RMSE divided by the reference's dynamic range.
pub fn nrmse(reference: &Image, test: &Image) -> Result<f64> {
    let range = reference.max() - reference.min();
    if !(range > 0.0) {
        return Err(Error::InvalidArgument("flat reference has no dynamic range".into()));
    }
    Ok(mse(reference, test)?.sqrt() / range)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub nrmse: f64,
    pub max_y: f64,
    pub min_y: f64,
}

impl MetricReport {
    pub fn compute(reference: &Image, test: &Image) -> Result<Self> {
        let mse = mse(reference, test)?;
        let (max_y, min_y) = (reference.max(), reference.min());
        if !(max_y > min_y) {
            return Err(Error::InvalidArgument("flat reference has no dynamic range".into()));
        }
        let rmse = mse.sqrt();
        Ok(Self {
            mse,
            rmse,
            psnr: psnr_from_mse(max_y, mse),
            nrmse: rmse / (max_y - min_y),
            max_y,
            min_y,
        })
    }
}
