//! Shift-invariant directional wavelet (non-subsampled contourlet) transform.
//!
//! Analysis runs an undecimated à trous pyramid: stage `j` smooths the current
//! lowpass with `h0` upsampled by `2^j` (circular, separable) and keeps the
//! difference as that level's highpass. Each highpass is then split into
//! directional bands by frequency wedges that sum to one. Every operation is a
//! circular convolution or an FFT product, so the transform commutes with
//! circular shifts, and synthesis is the plain sum of all bands.

mod directional;
mod fft2;
mod filter_bank;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Image, SpatialTransform};

pub use directional::wedge_center;
pub use filter_bank::{
    equivalent_pyramid_filter, upsample_filter, FilterBank, Kernel2d, BINOMIAL5,
};

use fft2::Fft2;

/// Undecimated band stack: highpass levels finest first, directions in
/// ascending orientation, lowpass last.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourletCoeffs {
    bands: Vec<Image>,
    source_size: (usize, usize),
}

impl ContourletCoeffs {
    pub fn new(bands: Vec<Image>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::Shape("coefficient stack has no bands".into()))?;
        let source_size = first.dims();
        if let Some(bad) = bands.iter().find(|b| b.dims() != source_size) {
            return Err(Error::Shape(format!(
                "band dims {:?} differ from {:?}",
                bad.dims(),
                source_size
            )));
        }
        Ok(Self { bands, source_size })
    }

    pub fn bands(&self) -> &[Image] {
        &self.bands
    }

    pub fn bands_mut(&mut self) -> &mut [Image] {
        &mut self.bands
    }

    pub fn band(&self, index: usize) -> &Image {
        &self.bands[index]
    }

    pub fn into_bands(self) -> Vec<Image> {
        self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn source_size(&self) -> (usize, usize) {
        self.source_size
    }

    pub fn lowpass(&self) -> &Image {
        self.bands.last().expect("non-empty by construction")
    }

    pub fn shift_circular(&self, dy: isize, dx: isize) -> Self {
        Self {
            bands: self.bands.iter().map(|b| b.shift_circular(dy, dx)).collect(),
            source_size: self.source_size,
        }
    }
}

/// Precomputed wedge masks and FFT plans for one image size.
#[derive(Clone)]
pub struct NsctPlan {
    bank: FilterBank,
    side: usize,
    fft: Fft2,
    masks: Vec<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for NsctPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NsctPlan").field("bank", &self.bank).field("side", &self.side).finish()
    }
}

impl NsctPlan {
    pub fn new(bank: &FilterBank, side: usize) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::Image(format!(
                "transform side must be a power of two >= 2, got {side}"
            )));
        }
        let masks = bank
            .directions_per_level()
            .iter()
            .map(|&d| directional::wedge_masks(side, d, bank.wedge_transition()))
            .collect();
        Ok(Self {
            bank: bank.clone(),
            side,
            fft: Fft2::new(side),
            masks,
        })
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Wedge masks of highpass `level` (0-based), in FFT index order.
    pub fn masks(&self, level: usize) -> &[Vec<f64>] {
        &self.masks[level]
    }

    pub fn forward(&self, image: &Image) -> Result<ContourletCoeffs> {
        if image.dims() != (self.side, self.side) {
            return Err(Error::Image(format!(
                "plan is for {0}x{0}, image is {1}x{2}",
                self.side,
                image.rows(),
                image.cols()
            )));
        }
        let mut bands = Vec::with_capacity(self.bank.band_count());
        let mut low = image.clone();
        for (level, masks) in self.masks.iter().enumerate() {
            let next = atrous_smooth(&low, self.bank.h0(), 1 << level);
            let high = low.sub(&next)?;
            if masks.len() == 1 {
                bands.push(high);
            } else {
                let spectrum = self.fft.forward_real(high.data());
                for mask in masks {
                    let filtered: Vec<Complex64> =
                        spectrum.iter().zip(mask).map(|(s, &m)| s * m).collect();
                    let data = self.fft.inverse_real(filtered);
                    bands.push(Image::new(self.side, self.side, data)?);
                }
            }
            low = next;
        }
        bands.push(low);
        ContourletCoeffs::new(bands)
    }
}

/// Analysis with a throwaway plan; see [`NsctPlan`] for repeated use.
pub fn forward(image: &Image, bank: &FilterBank) -> Result<ContourletCoeffs> {
    if !image.is_square() {
        return Err(Error::Image(format!(
            "transform needs a square image, got {}x{}",
            image.rows(),
            image.cols()
        )));
    }
    NsctPlan::new(bank, image.rows())?.forward(image)
}

/// Synthesis: the element-wise sum of all bands.
pub fn inverse(coeffs: &ContourletCoeffs, bank: &FilterBank) -> Result<Image> {
    if coeffs.band_count() != bank.band_count() {
        return Err(Error::Shape(format!(
            "{} bands given, bank produces {}",
            coeffs.band_count(),
            bank.band_count()
        )));
    }
    let (rows, cols) = coeffs.source_size();
    let mut out = Image::zeros(rows, cols);
    for band in coeffs.bands() {
        out.add_assign(band)?;
    }
    Ok(out)
}

/// Soft thresholding `sign(c)·max(|c| − tau, 0)` of every directional band;
/// the lowpass band passes through.
pub fn shrink_denoise(coeffs: &ContourletCoeffs, tau: f64) -> Result<ContourletCoeffs> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {tau}")));
    }
    let last = coeffs.band_count() - 1;
    let bands = coeffs
        .bands()
        .iter()
        .enumerate()
        .map(|(i, band)| {
            if i == last {
                band.clone()
            } else {
                band.map(|c| soft_threshold(c, tau))
            }
        })
        .collect();
    ContourletCoeffs::new(bands)
}

#[inline]
pub fn soft_threshold(c: f64, tau: f64) -> f64 {
    c.signum() * (c.abs() - tau).max(0.0)
}

/// Residual lowpass of the pyramid alone (what the lowpass band holds).
pub fn atrous_lowpass(image: &Image, bank: &FilterBank) -> Image {
    (0..bank.levels() - 1).fold(image.clone(), |low, j| atrous_smooth(&low, bank.h0(), 1 << j))
}

/// Circular separable convolution with `h` upsampled by `step`.
fn atrous_smooth(image: &Image, h: &[f64], step: usize) -> Image {
    let (rows, cols) = image.dims();
    let radius = (h.len() / 2) as isize;
    let offsets: Vec<(isize, f64)> = h
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(t, &w)| ((t as isize - radius) * step as isize, w))
        .collect();
    let src = image.data();
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        let out = &mut tmp[r * cols..(r + 1) * cols];
        for (c, o) in out.iter_mut().enumerate() {
            *o = offsets
                .iter()
                .map(|&(off, w)| w * row[(c as isize - off).rem_euclid(cols as isize) as usize])
                .sum();
        }
    }
    let mut data = vec![0.0; rows * cols];
    for &(off, w) in &offsets {
        for r in 0..rows {
            let sr = (r as isize - off).rem_euclid(rows as isize) as usize;
            let src_row = &tmp[sr * cols..(sr + 1) * cols];
            for (d, s) in data[r * cols..(r + 1) * cols].iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    Image::new(rows, cols, data).expect("dims preserved")
}

/// Band index each band moves to when the underlying image undergoes
/// `transform`; the returned `target[k]` is the destination of band `k`.
pub fn band_permutation(bank: &FilterBank, transform: SpatialTransform) -> Vec<usize> {
    let mut target = Vec::with_capacity(bank.band_count());
    let mut offset = 0;
    for &d in bank.directions_per_level() {
        for k in 0..d {
            target.push(offset + transform.map_orientation(k, d));
        }
        offset += d;
    }
    target.push(offset);
    target
}

/// Transforms every band spatially and permutes directional bands so that the
/// result equals the analysis of the transformed image.
pub fn transform_coeffs(
    coeffs: &ContourletCoeffs,
    bank: &FilterBank,
    transform: SpatialTransform,
) -> Result<ContourletCoeffs> {
    let target = band_permutation(bank, transform);
    if target.len() != coeffs.band_count() {
        return Err(Error::Shape(format!(
            "{} bands given, bank produces {}",
            coeffs.band_count(),
            target.len()
        )));
    }
    let mut bands = vec![None; coeffs.band_count()];
    for (k, band) in coeffs.bands().iter().enumerate() {
        bands[target[k]] = Some(transform.apply(band)?);
    }
    ContourletCoeffs::new(bands.into_iter().map(|b| b.expect("permutation")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn random_image(side: usize, seed: u64) -> Image {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, side, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn standard_bank_has_fifteen_bands() {
        let bank = FilterBank::new(4, &[8, 4, 2], &BINOMIAL5).unwrap();
        assert_eq!(bank.band_count(), 15);
        assert_eq!(bank.lowpass_band(), 14);
        assert_eq!(bank.band_offset(2), 12);
    }

    #[test]
    fn bank_validation() {
        assert!(FilterBank::new(4, &[8, 4, 3], &BINOMIAL5).is_err());
        assert!(FilterBank::new(4, &[8, 4], &BINOMIAL5).is_err());
        assert!(FilterBank::new(1, &[], &BINOMIAL5).is_err());
        assert!(FilterBank::new(2, &[1], &[0.25, 0.5, 0.3]).is_err());
        assert!(FilterBank::new(2, &[1], &[0.5, 0.5]).is_err());
        assert!(FilterBank::standard().with_wedge_transition(PI / 4.0).is_err());
        assert!(FilterBank::standard().with_wedge_transition(0.0).is_err());
    }

    #[test]
    fn degenerate_identity_bank_has_zero_highpass() {
        let bank = FilterBank::new(2, &[1], &[1.0]).unwrap();
        let x = random_image(16, 3);
        let coeffs = forward(&x, &bank).unwrap();
        assert_eq!(coeffs.band_count(), 2);
        assert!(coeffs.band(0).data().iter().all(|&v| v == 0.0));
        assert_eq!(coeffs.band(1), &x);
    }

    #[test]
    fn constant_image_lands_in_lowpass() {
        let bank = FilterBank::standard();
        let x = Image::filled(32, 32, 3.25);
        let coeffs = forward(&x, &bank).unwrap();
        for band in &coeffs.bands()[..14] {
            assert!(band.data().iter().all(|v| v.abs() < 1e-12));
        }
        assert!(coeffs.lowpass().data().iter().all(|v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn rejects_non_power_of_two_and_non_square() {
        let bank = FilterBank::standard();
        assert!(forward(&Image::zeros(24, 24), &bank).is_err());
        assert!(forward(&Image::zeros(32, 16), &bank).is_err());
    }

    #[test]
    fn inverse_edge_cases() {
        let bank = FilterBank::standard();
        let zeros = ContourletCoeffs::new(vec![Image::zeros(8, 8); 15]).unwrap();
        assert!(inverse(&zeros, &bank).unwrap().data().iter().all(|&v| v == 0.0));

        let mut bands = vec![Image::zeros(8, 8); 15];
        bands[14] = Image::filled(8, 8, 0.7);
        let only_low = ContourletCoeffs::new(bands).unwrap();
        assert_eq!(inverse(&only_low, &bank).unwrap(), Image::filled(8, 8, 0.7));

        let short = ContourletCoeffs::new(vec![Image::zeros(8, 8); 14]).unwrap();
        assert!(inverse(&short, &bank).is_err());
        assert!(ContourletCoeffs::new(vec![Image::zeros(8, 8), Image::zeros(4, 4)]).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let bank = FilterBank::standard();
        let x = random_image(64, 11);
        let back = inverse(&forward(&x, &bank).unwrap(), &bank).unwrap();
        assert!(back.relative_l2_error(&x).unwrap() <= 1e-10);
    }

    #[test]
    fn wedge_masks_partition_unity() {
        let bank = FilterBank::standard();
        let plan = NsctPlan::new(&bank, 32).unwrap();
        for level in 0..3 {
            let masks = plan.masks(level);
            for i in 0..32 * 32 {
                let total: f64 = masks.iter().map(|m| m[i]).sum();
                assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn soft_threshold_values() {
        assert!((soft_threshold(0.5, 0.2) - 0.3).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.1, 0.2), 0.0);
        assert_eq!(soft_threshold(-0.7, 0.0), -0.7);

        let bank = FilterBank::standard();
        let coeffs = forward(&random_image(16, 5), &bank).unwrap();
        assert_eq!(shrink_denoise(&coeffs, 0.0).unwrap(), coeffs);
        assert!(shrink_denoise(&coeffs, -1.0).is_err());
        let shrunk = shrink_denoise(&coeffs, 1e9).unwrap();
        assert_eq!(shrunk.lowpass(), coeffs.lowpass());
        assert!(shrunk.bands()[..14].iter().all(|b| b.energy() == 0.0));
    }

    #[test]
    fn band_permutation_is_a_permutation() {
        let bank = FilterBank::standard();
        for t in SpatialTransform::ALL {
            let mut p = band_permutation(&bank, t);
            assert_eq!(p[14], 14);
            p.sort_unstable();
            assert_eq!(p, (0..15).collect::<Vec<_>>());
        }
    }
}
