use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{Geometry, Phantom};
use crate::error::{Error, Result};

/// Floor applied to `I − r` before the log so photon-starved bins stay finite.
pub const EPS_COUNT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinogramKind {
    LineIntegral,
    PhotonCount,
    LogNormalized,
}

/// Source intensity `b` (photons per bin) and additive background `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dose {
    pub b: f64,
    pub r: f64,
}

impl Dose {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!("source intensity must be positive, got {}", self.b)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!("background must be >= 0, got {}", self.r)));
        }
        Ok(())
    }
}

/// View-major `n_angles × n_bins` measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub n_angles: usize,
    pub n_bins: usize,
    pub data: Vec<f64>,
    pub kind: SinogramKind,
    pub dose: Option<Dose>,
}

impl Sinogram {
    pub fn zeros(geom: &Geometry, kind: SinogramKind) -> Self {
        Self {
            n_angles: geom.n_angles,
            n_bins: geom.n_bins,
            data: vec![0.0; geom.n_angles * geom.n_bins],
            kind,
            dose: None,
        }
    }

    pub fn view(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn view_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    fn expect_kind(&self, kind: SinogramKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!("expected a {kind:?} sinogram, got {:?}", self.kind)));
        }
        Ok(())
    }
}

/// Analytic line integrals of the phantom, exact at every bin.
pub fn project(phantom: &Phantom, geom: &Geometry) -> Result<Sinogram> {
    geom.validate()?;
    if phantom.extent() > geom.detector_radius() {
        return Err(Error::InvalidArgument(format!(
            "phantom extends to {:.1} mm, detector covers {:.1} mm",
            phantom.extent(),
            geom.detector_radius()
        )));
    }
    let mut sino = Sinogram::zeros(geom, SinogramKind::LineIntegral);
    for i in 0..geom.n_angles {
        let theta = geom.angle(i);
        for (j, v) in sino.view_mut(i).iter_mut().enumerate() {
            let s = geom.bin_offset(j);
            *v = phantom.ellipses.iter().map(|e| e.line_integral(theta, s)).sum();
        }
    }
    Ok(sino)
}

/// Poisson counts `I ~ Poisson(b·e^(−l) + r)`. View `i` draws from ChaCha
/// stream `i` of `seed`, so the result does not depend on evaluation order.
pub fn simulate_dose(sino: &Sinogram, dose: Dose, seed: u64) -> Result<Sinogram> {
    sino.expect_kind(SinogramKind::LineIntegral)?;
    dose.validate()?;
    let mut out = sino.clone();
    out.kind = SinogramKind::PhotonCount;
    out.dose = Some(dose);
    for i in 0..sino.n_angles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for v in out.view_mut(i) {
            let mean = dose.b * (-*v).exp() + dose.r;
            *v = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
                    .sample(&mut rng)
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// `y = ln(b / max(I − r, EPS_COUNT))`.
pub fn log_transform(sino: &Sinogram, dose: Dose) -> Result<Sinogram> {
    sino.expect_kind(SinogramKind::PhotonCount)?;
    dose.validate()?;
    let mut out = sino.clone();
    out.kind = SinogramKind::LogNormalized;
    for v in out.data.iter_mut() {
        *v = (dose.b / (*v - dose.r).max(EPS_COUNT)).ln();
    }
    Ok(out)
}

/// Two independent seeds derived from one.
pub(crate) fn split_seed(seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (rng.next_u64(), rng.next_u64())
}
