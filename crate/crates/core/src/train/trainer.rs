use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{sample_patch_batch, EncodedSubset, PairedSlices, PatchBatch};
use super::log::{LogRecord, TrainLog};
use super::schedule::{clip_gradients, lr_at};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::io::{load_weights, save_weights};
use crate::metrics::MetricReport;
use crate::nn::{init_gaussian, Architecture, Engine, NetworkParams};
use crate::nsct::FilterBank;
use crate::pipeline::{denoise_slice, units_to_hu, Representation};

/// Position of a run between epochs; enough to continue bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    /// Generator position, as a decimal string (JSON numbers cannot hold it).
    pub rng_word_pos: String,
    pub active: Vec<usize>,
    pub log: TrainLog,
}

pub struct Trainer<'a> {
    config: TrainConfig,
    params: NetworkParams,
    engine: Engine,
    repr: Representation,
    train: &'a PairedSlices,
    validation: &'a PairedSlices,
    rng: ChaCha8Rng,
    epoch: usize,
    subset: EncodedSubset,
    log: TrainLog,
}

fn draw_subset(rng: &mut ChaCha8Rng, available: usize, size: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, available, size.min(available)).into_vec();
    picked.sort_unstable();
    picked
}

impl<'a> Trainer<'a> {
    /// Fresh run: Gaussian initialisation and the first slice subset, both
    /// from `config.seed`.
    pub fn new(
        config: TrainConfig,
        arch: &Architecture,
        bank: &FilterBank,
        train: &'a PairedSlices,
        validation: &'a PairedSlices,
    ) -> Result<Self> {
        config.validate()?;
        arch.validate()?;
        let params = init_gaussian(arch, config.init_sigma, config.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let active = draw_subset(&mut rng, train.len(), config.subset_size);
        Self::assemble(config, params, bank, train, validation, rng, 0, active, TrainLog::default())
    }

    /// Continues from a checkpointed state.
    pub fn resume(
        config: TrainConfig,
        params: NetworkParams,
        state: TrainState,
        bank: &FilterBank,
        train: &'a PairedSlices,
        validation: &'a PairedSlices,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let pos: u128 = state
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Format(format!("bad generator position {:?}", state.rng_word_pos)))?;
        rng.set_word_pos(pos);
        Self::assemble(config, params, bank, train, validation, rng, state.epoch, state.active, state.log)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: TrainConfig,
        params: NetworkParams,
        bank: &FilterBank,
        train: &'a PairedSlices,
        validation: &'a PairedSlices,
        rng: ChaCha8Rng,
        epoch: usize,
        active: Vec<usize>,
        log: TrainLog,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Dataset("no training slices".into()));
        }
        if validation.is_empty() {
            return Err(Error::Dataset("no validation slices".into()));
        }
        let side = train.side().expect("nonempty");
        if validation.side() != Some(side) {
            return Err(Error::Dataset("validation and training slices differ in size".into()));
        }
        let repr = Representation::for_architecture(&params.arch, bank, side)?;
        let subset = EncodedSubset::encode(train, &active, &repr)?;
        Ok(Self {
            engine: Engine::new(config.precision),
            config,
            params,
            repr,
            train,
            validation,
            rng,
            epoch,
            subset,
            log,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn into_params(self) -> NetworkParams {
        self.params
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            epoch: self.epoch,
            rng_word_pos: self.rng.get_word_pos().to_string(),
            active: self.subset.indices.clone(),
            log: self.log.clone(),
        }
    }

    /// Draws the next batch, advancing the generator.
    pub fn sample_batch(&mut self) -> Result<PatchBatch> {
        sample_patch_batch(
            &self.subset,
            self.config.batch_size,
            self.config.patch_side,
            self.config.augment,
            &self.repr,
            &mut self.rng,
        )
    }

    /// One SGD iteration on a fresh batch; returns the batch loss.
    pub fn step(&mut self, lr: f64) -> Result<f64> {
        let batch = self.sample_batch()?;
        self.step_on(&batch.noisy, &batch.clean, lr)
    }

    /// One SGD iteration on the given batch.
    pub fn step_on(&mut self, noisy: &crate::nn::Tensor, clean: &crate::nn::Tensor, lr: f64) -> Result<f64> {
        let (loss, mut grads) = self
            .engine
            .loss_and_grad(&mut self.params, noisy, clean, self.config.lambda)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                epoch: self.epoch,
                iteration: 0,
            });
        }
        clip_gradients(&mut grads, self.config.clip_theta)?;
        for (slot, g) in self.params.trainable_mut().into_iter().zip(grads.flat()) {
            for (w, d) in slot.values.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
        Ok(loss)
    }

    /// Runs one epoch, re-drawing the slice subset first when due. Returns
    /// the log record if the epoch was validated.
    pub fn run_epoch(&mut self) -> Result<Option<LogRecord>> {
        if self.is_finished() {
            return Err(Error::InvalidArgument("training already finished".into()));
        }
        let epoch = self.epoch;
        if epoch > 0 && epoch % self.config.subset_interval == 0 && self.config.subset_size < self.train.len() {
            let active = draw_subset(&mut self.rng, self.train.len(), self.config.subset_size);
            // release the old coefficients before encoding the new ones
            self.subset.noisy.clear();
            self.subset.clean.clear();
            self.subset = EncodedSubset::encode(self.train, &active, &self.repr)?;
        }
        let lr = lr_at(epoch, &self.config)?;
        let mut total = 0.0;
        for iteration in 0..self.config.iterations_per_epoch {
            total += self.step(lr).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite { epoch, iteration },
                other => other,
            })?;
        }
        self.epoch += 1;
        let due = self.epoch % self.config.eval_every == 0 || self.is_finished();
        if !due {
            return Ok(None);
        }
        let report = self.validate()?;
        let record = LogRecord {
            epoch,
            loss: total / self.config.iterations_per_epoch as f64,
            psnr: report.psnr,
            nrmse: report.nrmse,
            lr,
        };
        self.log.push(record)?;
        Ok(Some(record))
    }

    /// Mean PSNR and NRMSE (HU) of the denoised validation slices.
    pub fn validate(&self) -> Result<MetricReport> {
        mean_report(
            self.validation
                .noisy
                .iter()
                .zip(&self.validation.clean)
                .map(|(noisy, clean)| {
                    let out = denoise_slice(&self.engine, &self.params, &self.repr, noisy)?;
                    MetricReport::compute(&units_to_hu(clean), &units_to_hu(&out))
                }),
        )
    }

    /// Runs the remaining epochs, calling `on_epoch` after each.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&Self, Option<&LogRecord>) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let record = self.run_epoch()?;
            on_epoch(self, record.as_ref())?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let extra = serde_json::json!({
            "train_state": self.state(),
            "train_config": self.config,
        });
        save_weights(path, &self.params, extra)
    }
}

/// Parameters and, for training checkpoints, the run state.
pub fn load_checkpoint(path: &Path) -> Result<(NetworkParams, Option<TrainState>)> {
    let (params, header) = load_weights(path)?;
    let state = match header.extra.get("train_state") {
        Some(v) => Some(serde_json::from_value(v.clone())?),
        None => None,
    };
    Ok((params, state))
}

/// Field-wise mean of metric reports.
pub fn mean_report(reports: impl Iterator<Item = Result<MetricReport>>) -> Result<MetricReport> {
    let mut sum = MetricReport {
        mse: 0.0,
        rmse: 0.0,
        psnr: 0.0,
        nrmse: 0.0,
        max_y: 0.0,
        min_y: 0.0,
    };
    let mut n = 0usize;
    for r in reports {
        let r = r?;
        sum.mse += r.mse;
        sum.rmse += r.rmse;
        sum.psnr += r.psnr;
        sum.nrmse += r.nrmse;
        sum.max_y += r.max_y;
        sum.min_y += r.min_y;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Dataset("no slices to evaluate".into()));
    }
    let k = 1.0 / n as f64;
    Ok(MetricReport {
        mse: sum.mse * k,
        rmse: sum.rmse * k,
        psnr: sum.psnr * k,
        nrmse: sum.nrmse * k,
        max_y: sum.max_y * k,
        min_y: sum.min_y * k,
    })
}
