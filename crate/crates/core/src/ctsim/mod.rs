//! Synthetic CT acquisition: analytic ellipse phantoms, parallel-beam
//! projection, Poisson dose simulation and filtered backprojection.

mod fbp;
mod geometry;
mod phantom;
mod sinogram;

pub use fbp::{fbp, ram_lak, ramp_filter};
pub use geometry::Geometry;
pub use phantom::{Ellipse, Phantom};
pub use sinogram::{log_transform, project, simulate_dose, Dose, Sinogram, SinogramKind, EPS_COUNT};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::Image;

/// Attenuation of water in mm⁻¹, the HU zero point.
pub const MU_WATER: f64 = 0.02;
/// Default routine-dose source intensity (photons per bin) and background.
pub const DEFAULT_DOSE: Dose = Dose { b: 1e5, r: 10.0 };

pub fn mu_to_hu(mu: f64, mu_water: f64) -> f64 {
    1000.0 * (mu - mu_water) / mu_water
}

pub fn hu_to_mu(hu: f64, mu_water: f64) -> f64 {
    mu_water * (1.0 + hu / 1000.0)
}

pub fn image_to_hu(image: &Image, mu_water: f64) -> Image {
    image.map(|mu| mu_to_hu(mu, mu_water))
}

pub fn image_to_mu(image: &Image, mu_water: f64) -> Image {
    image.map(|hu| hu_to_mu(hu, mu_water))
}

/// Reconstructions of one phantom, in mm⁻¹.
#[derive(Clone, Debug)]
pub struct SlicePair {
    /// Noiseless reconstruction.
    pub truth: Image,
    pub routine: Image,
    /// Same acquisition at a quarter of the routine source intensity.
    pub quarter: Image,
}

/// Routine and quarter dose reconstructions plus the noiseless one; the two
/// noisy acquisitions use independent streams derived from `seed`.
pub fn generate_pair(phantom: &Phantom, geom: &Geometry, routine: Dose, seed: u64) -> Result<SlicePair> {
    let clean = project(phantom, geom)?;
    let quarter = Dose {
        b: routine.b / 4.0,
        r: routine.r,
    };
    let (routine_seed, quarter_seed) = sinogram::split_seed(seed);
    let reconstruct = |dose: Dose, seed: u64| -> Result<Image> {
        let counts = simulate_dose(&clean, dose, seed)?;
        fbp(&log_transform(&counts, dose)?, geom)
    };
    Ok(SlicePair {
        truth: fbp(&clean, geom)?,
        routine: reconstruct(routine, routine_seed)?,
        quarter: reconstruct(quarter, quarter_seed)?,
    })
}

/// Settings for a batch of random body slices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub side: usize,
    pub pixel_size: f64,
    pub n_angles: usize,
    /// Routine dose; the quarter dose uses `b / 4`.
    pub dose: Dose,
    /// Probability that a slice carries the opposed bone pair.
    pub bone_fraction: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            side: 256,
            pixel_size: 1.5,
            n_angles: 360,
            dose: DEFAULT_DOSE,
            bone_fraction: 0.75,
        }
    }
}

impl SimulationConfig {
    pub fn geometry(&self) -> Geometry {
        Geometry::for_grid(self.side, self.pixel_size, self.n_angles)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().validate()?;
        self.dose.validate()?;
        if !(0.0..=1.0).contains(&self.bone_fraction) {
            return Err(crate::Error::Config(format!("bone_fraction {} outside [0, 1]", self.bone_fraction)));
        }
        Ok(())
    }
}

/// Slice `index` of the dataset seeded by `seed`; each slice has its own
/// generator stream, so slices can be produced in any order.
pub fn simulate_slice(config: &SimulationConfig, seed: u64, index: usize) -> Result<(Phantom, SlicePair)> {
    use rand::{Rng, RngCore, SeedableRng};
    config.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let geom = config.geometry();
    let bones = rng.random_bool(config.bone_fraction);
    let phantom = Phantom::random_body(&mut rng, geom.grid_half_width(), bones)?;
    let noise_seed = rng.next_u64();
    let pair = generate_pair(&phantom, &geom, config.dose, noise_seed)?;
    Ok((phantom, pair))
}
