//! Glue between images, transform coefficients and network tensors.
//!
//! Network inputs and targets are in HU/1000 so that tissue contrast and
//! noise sit near unit scale.

use crate::ctsim::{mu_to_hu, MU_WATER};
use crate::error::{Error, Result};
use crate::image::{Image, SpatialTransform};
use crate::nn::{Architecture, Engine, NetworkParams, Tensor};
use crate::nsct::{band_permutation, inverse, shrink_denoise, ContourletCoeffs, FilterBank, NsctPlan};

/// HU per network unit.
pub const HU_PER_UNIT: f64 = 1000.0;

pub fn mu_to_units(image: &Image) -> Image {
    image.map(|mu| mu_to_hu(mu, MU_WATER) / HU_PER_UNIT)
}

pub fn units_to_hu(image: &Image) -> Image {
    image.scale(HU_PER_UNIT)
}

/// How a slice is presented to the network: as transform bands or as the
/// image itself.
#[derive(Clone, Debug)]
pub enum Representation {
    Wavelet(NsctPlan),
    Image,
}

impl Representation {
    pub fn for_architecture(arch: &Architecture, bank: &FilterBank, side: usize) -> Result<Self> {
        if !arch.variant.is_wavelet() {
            return Ok(Representation::Image);
        }
        if arch.bands != bank.band_count() {
            return Err(Error::Architecture(format!(
                "network expects {} bands, filter bank produces {}",
                arch.bands,
                bank.band_count()
            )));
        }
        Ok(Representation::Wavelet(NsctPlan::new(bank, side)?))
    }

    pub fn channels(&self) -> usize {
        match self {
            Representation::Wavelet(plan) => plan.bank().band_count(),
            Representation::Image => 1,
        }
    }

    pub fn encode(&self, image: &Image) -> Result<Vec<Image>> {
        match self {
            Representation::Wavelet(plan) => Ok(plan.forward(image)?.into_bands()),
            Representation::Image => Ok(vec![image.clone()]),
        }
    }

    pub fn decode(&self, bands: Vec<Image>) -> Result<Image> {
        match self {
            Representation::Wavelet(plan) => inverse(&ContourletCoeffs::new(bands)?, plan.bank()),
            Representation::Image => bands
                .into_iter()
                .next()
                .ok_or_else(|| Error::Shape("no channels to decode".into())),
        }
    }

    /// Band index each channel moves to under `transform`.
    pub fn permutation(&self, transform: SpatialTransform) -> Vec<usize> {
        match self {
            Representation::Wavelet(plan) => band_permutation(plan.bank(), transform),
            Representation::Image => vec![0],
        }
    }
}

/// Stacks equally sized channel lists into a batch tensor.
pub fn volumes_to_tensor(volumes: &[Vec<Image>]) -> Result<Tensor> {
    let first = volumes
        .first()
        .and_then(|v| v.first())
        .ok_or_else(|| Error::Shape("empty batch".into()))?;
    let (h, w) = first.dims();
    let c = volumes[0].len();
    let mut data = Vec::with_capacity(volumes.len() * c * h * w);
    for vol in volumes {
        if vol.len() != c || vol.iter().any(|b| b.dims() != (h, w)) {
            return Err(Error::Shape("batch items differ in shape".into()));
        }
        for band in vol {
            data.extend_from_slice(band.data());
        }
    }
    Tensor::new([volumes.len(), c, h, w], data)
}

/// Channels of batch item `n` as images.
pub fn tensor_item_to_volume(t: &Tensor, n: usize) -> Result<Vec<Image>> {
    (0..t.channels())
        .map(|c| Image::new(t.height(), t.width(), t.channel(n, c).to_vec()))
        .collect()
}

/// Whole-slice inference: encode, run the network with running batch-norm
/// statistics, decode. Input and output are in network units.
pub fn denoise_slice(engine: &Engine, params: &NetworkParams, repr: &Representation, slice: &Image) -> Result<Image> {
    let x = volumes_to_tensor(&[repr.encode(slice)?])?;
    let y = engine.forward(params, &x)?;
    repr.decode(tensor_item_to_volume(&y, 0)?)
}

/// Soft-threshold baseline on the directional bands.
pub fn shrinkage_slice(plan: &NsctPlan, slice: &Image, tau: f64) -> Result<Image> {
    inverse(&shrink_denoise(&plan.forward(slice)?, tau)?, plan.bank())
}

/// Threshold from `candidates` with the lowest summed squared error against
/// the clean slices.
pub fn tune_shrinkage(plan: &NsctPlan, noisy: &[Image], clean: &[Image], candidates: &[f64]) -> Result<f64> {
    if noisy.is_empty() || noisy.len() != clean.len() || candidates.is_empty() {
        return Err(Error::Dataset("threshold tuning needs paired slices and candidates".into()));
    }
    let coeffs = noisy.iter().map(|s| plan.forward(s)).collect::<Result<Vec<_>>>()?;
    let mut best = (f64::INFINITY, candidates[0]);
    for &tau in candidates {
        let mut err = 0.0;
        for (c, target) in coeffs.iter().zip(clean) {
            let out = inverse(&shrink_denoise(c, tau)?, plan.bank())?;
            err += crate::metrics::mse(target, &out)?;
        }
        if err < best.0 {
            best = (err, tau);
        }
    }
    Ok(best.1)
}
