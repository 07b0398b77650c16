//! Simulated datasets on disk: one RFT1 file per reconstruction plus a
//! manifest echoing the configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{require_exists, ExperimentConfig};
use crate::ctsim::{image_to_hu, simulate_slice, Phantom, SimulationConfig, MU_WATER};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{read_image, write_image};
use crate::pipeline::mu_to_units;
use crate::train::PairedSlices;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoseRecord {
    pub routine_b: f64,
    pub quarter_b: f64,
    pub electronic_noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub split: String,
    /// Generator stream of the slice within the dataset seed.
    pub index: usize,
    pub phantom: Phantom,
    /// Paths relative to the dataset directory; images hold μ in 1/mm.
    pub truth: PathBuf,
    pub routine: PathBuf,
    pub quarter: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub dose: DoseRecord,
    pub slices: Vec<SliceRecord>,
}

impl Manifest {
    pub fn load(dataset_dir: &Path) -> Result<Self> {
        let path = dataset_dir.join(MANIFEST_FILE);
        require_exists(&path, "dataset manifest")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Simulates both splits of `config` into `dir`. Train slices use streams
/// `0..train`, test slices the following ones.
pub fn write_dataset(config: &ExperimentConfig, dir: &Path, mut progress: impl FnMut(&str)) -> Result<Manifest> {
    let dose = config.simulation.dose;
    let mut slices = Vec::new();
    let splits = [("train", 0..config.split.train), ("test", config.split.train..config.split.train + config.split.test)];
    for (split, range) in splits {
        let split_dir = dir.join(split);
        std::fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        for index in range {
            let (phantom, pair) = simulate_slice(&config.simulation, config.seed, index)?;
            let name = |kind: &str| PathBuf::from(split).join(format!("{index:04}_{kind}.rft"));
            let record = SliceRecord {
                split: split.to_string(),
                index,
                phantom,
                truth: name("truth"),
                routine: name("routine"),
                quarter: name("quarter"),
            };
            write_image(&dir.join(&record.truth), &pair.truth)?;
            write_image(&dir.join(&record.routine), &pair.routine)?;
            write_image(&dir.join(&record.quarter), &pair.quarter)?;
            progress(&format!("{split} slice {index}"));
            slices.push(record);
        }
    }
    let manifest = Manifest {
        config: config.clone(),
        seed: config.seed,
        simulation: config.simulation,
        dose: DoseRecord {
            routine_b: dose.b,
            quarter_b: dose.b / 4.0,
            electronic_noise: dose.r,
        },
        slices,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// One split in network units, plus the noiseless reconstructions.
pub struct LoadedSplit {
    pub pairs: PairedSlices,
    pub truth: Vec<Image>,
    pub indices: Vec<usize>,
}

impl LoadedSplit {
    /// Routine-dose references in HU.
    pub fn reference_hu(&self) -> Vec<Image> {
        self.pairs.clean.iter().map(crate::pipeline::units_to_hu).collect()
    }
}

pub fn load_split(dir: &Path, manifest: &Manifest, split: &str) -> Result<LoadedSplit> {
    let (mut noisy, mut clean, mut truth, mut indices) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for s in manifest.slices.iter().filter(|s| s.split == split) {
        noisy.push(mu_to_units(&read_image(&dir.join(&s.quarter))?));
        clean.push(mu_to_units(&read_image(&dir.join(&s.routine))?));
        truth.push(image_to_hu(&read_image(&dir.join(&s.truth))?, MU_WATER));
        indices.push(s.index);
    }
    if noisy.is_empty() {
        return Err(Error::Dataset(format!("dataset has no {split} slices")));
    }
    Ok(LoadedSplit {
        pairs: PairedSlices::new(noisy, clean)?,
        truth,
        indices,
    })
}
