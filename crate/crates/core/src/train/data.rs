use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, SpatialTransform};
use crate::nn::Tensor;
use crate::pipeline::{volumes_to_tensor, Representation};

/// Noisy/clean slice pairs in network units.
#[derive(Clone, Debug, Default)]
pub struct PairedSlices {
    pub noisy: Vec<Image>,
    pub clean: Vec<Image>,
}

impl PairedSlices {
    pub fn new(noisy: Vec<Image>, clean: Vec<Image>) -> Result<Self> {
        if noisy.len() != clean.len() {
            return Err(Error::Dataset(format!("{} noisy slices but {} clean", noisy.len(), clean.len())));
        }
        if let Some(first) = noisy.first() {
            if !first.is_square() {
                return Err(Error::Dataset("slices must be square".into()));
            }
            if noisy.iter().chain(&clean).any(|s| s.dims() != first.dims()) {
                return Err(Error::Dataset("slices differ in size".into()));
            }
        }
        Ok(Self { noisy, clean })
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    /// Side length of the (square) slices.
    pub fn side(&self) -> Option<usize> {
        self.noisy.first().map(Image::rows)
    }
}

/// Encoded coefficients of the currently active slices.
#[derive(Clone, Debug)]
pub struct EncodedSubset {
    pub indices: Vec<usize>,
    pub noisy: Vec<Vec<Image>>,
    pub clean: Vec<Vec<Image>>,
}

impl EncodedSubset {
    pub fn encode(pairs: &PairedSlices, indices: &[usize], repr: &Representation) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Dataset("empty training subset".into()));
        }
        let mut noisy = Vec::with_capacity(indices.len());
        let mut clean = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= pairs.len() {
                return Err(Error::Dataset(format!("slice {i} out of range")));
            }
            noisy.push(repr.encode(&pairs.noisy[i])?);
            clean.push(repr.encode(&pairs.clean[i])?);
        }
        Ok(Self {
            indices: indices.to_vec(),
            noisy,
            clean,
        })
    }

    pub fn side(&self) -> usize {
        self.noisy[0][0].rows()
    }
}

/// Where one batch item came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchDraw {
    /// Position within the active subset.
    pub slice: usize,
    pub row: usize,
    pub col: usize,
    pub transform: SpatialTransform,
}

pub struct PatchBatch {
    pub noisy: Tensor,
    pub clean: Tensor,
    pub draws: Vec<PatchDraw>,
}

pub fn draw_transform(rng: &mut ChaCha8Rng) -> SpatialTransform {
    SpatialTransform::ALL[rng.random_range(0..SpatialTransform::ALL.len())]
}

/// Applies `transform` to every channel and moves channel `k` to
/// `permutation[k]`, so directional bands keep their orientation meaning.
pub fn transform_volume(volume: &[Image], transform: SpatialTransform, permutation: &[usize]) -> Result<Vec<Image>> {
    if permutation.len() != volume.len() {
        return Err(Error::Shape(format!(
            "{} channels but a permutation of {}",
            volume.len(),
            permutation.len()
        )));
    }
    let mut out = vec![None; volume.len()];
    for (k, band) in volume.iter().enumerate() {
        out[permutation[k]] = Some(transform.apply(band)?);
    }
    out.into_iter()
        .map(|b| b.ok_or_else(|| Error::Shape("channel map is not a permutation".into())))
        .collect()
}

/// The same flip or rotation applied to a noisy and a clean patch.
pub fn augment(
    noisy: &[Image],
    clean: &[Image],
    transform: SpatialTransform,
    permutation: &[usize],
) -> Result<(Vec<Image>, Vec<Image>)> {
    Ok((
        transform_volume(noisy, transform, permutation)?,
        transform_volume(clean, transform, permutation)?,
    ))
}

/// Draws `batch` aligned patches of side `patch` at uniform slices and
/// positions, optionally augmented.
pub fn sample_patch_batch(
    subset: &EncodedSubset,
    batch: usize,
    patch: usize,
    augment_patches: bool,
    repr: &Representation,
    rng: &mut ChaCha8Rng,
) -> Result<PatchBatch> {
    let side = subset.side();
    if patch > side {
        return Err(Error::Dataset(format!("patch {patch} larger than slice side {side}")));
    }
    let mut noisy = Vec::with_capacity(batch);
    let mut clean = Vec::with_capacity(batch);
    let mut draws = Vec::with_capacity(batch);
    for _ in 0..batch {
        let slice = rng.random_range(0..subset.indices.len());
        let row = rng.random_range(0..=side - patch);
        let col = rng.random_range(0..=side - patch);
        let transform = if augment_patches {
            draw_transform(rng)
        } else {
            SpatialTransform::Identity
        };
        let crop = |vol: &[Image]| -> Result<Vec<Image>> {
            vol.iter().map(|b| b.crop(row, col, patch, patch)).collect()
        };
        let (n, c) = (crop(&subset.noisy[slice])?, crop(&subset.clean[slice])?);
        let (n, c) = if transform == SpatialTransform::Identity {
            (n, c)
        } else {
            augment(&n, &c, transform, &repr.permutation(transform))?
        };
        noisy.push(n);
        clean.push(c);
        draws.push(PatchDraw {
            slice,
            row,
            col,
            transform,
        });
    }
    Ok(PatchBatch {
        noisy: volumes_to_tensor(&noisy)?,
        clean: volumes_to_tensor(&clean)?,
        draws,
    })
}
