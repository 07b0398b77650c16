use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{require_exists, ExperimentConfig};
use super::dataset::{load_split, write_dataset, LoadedSplit, Manifest};
use super::{ABLATION_DIR, CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{write_image, write_pgm};
use crate::metrics::MetricReport;
use crate::nn::{Architecture, Engine, NetworkParams};
use crate::nsct::{FilterBank, NsctPlan};
use crate::pipeline::{denoise_slice, shrinkage_slice, tune_shrinkage, units_to_hu, Representation};
use crate::train::{load_checkpoint, mean_report, TrainConfig, TrainLog, Trainer};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

/// Writes to a sibling temporary file first so an interrupted write never
/// replaces a good checkpoint.
fn save_checkpoint_atomically(trainer: &Trainer, path: &Path) -> Result<()> {
    let tmp = path.with_extension("wdn.partial");
    trainer.save_checkpoint(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn load_dataset(config: &ExperimentConfig) -> Result<(Manifest, LoadedSplit, LoadedSplit)> {
    let dir = &config.dataset_dir;
    let manifest = Manifest::load(dir)?;
    let train = load_split(dir, &manifest, "train")?;
    let test = load_split(dir, &manifest, "test")?;
    Ok((manifest, train, test))
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub dir: PathBuf,
    pub files: usize,
}

/// Simulates the train and test splits into the output directory.
pub fn cmd_simulate(config: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<SimulateSummary> {
    let dir = &config.output_dir;
    create_dir(dir)?;
    let manifest = write_dataset(config, dir, &mut progress)?;
    Ok(SimulateSummary {
        dir: dir.clone(),
        files: 3 * manifest.slices.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub epochs: usize,
    pub final_psnr: Option<f64>,
    pub final_nrmse: Option<f64>,
}

/// Trains `arch` with `train_config` and writes the checkpoint and log into
/// `out`. The checkpoint is refreshed after each due epoch, so a non-finite
/// loss leaves the last good one in place.
pub fn train_into(
    out: &Path,
    arch: &Architecture,
    train_config: &TrainConfig,
    resume: Option<&Path>,
    train: &LoadedSplit,
    test: &LoadedSplit,
    mut progress: impl FnMut(&str),
) -> Result<(TrainSummary, NetworkParams)> {
    create_dir(out)?;
    let bank = FilterBank::standard();
    let mut trainer = match resume {
        Some(path) => {
            require_exists(path, "resume checkpoint")?;
            let (params, state) = load_checkpoint(path)?;
            if &params.arch != arch {
                return Err(Error::Architecture(format!(
                    "checkpoint {} holds {:?}, config asks for {:?}",
                    path.display(),
                    params.arch,
                    arch
                )));
            }
            let state = state.ok_or_else(|| Error::Format(format!("{} has no training state", path.display())))?;
            Trainer::resume(train_config.clone(), params, state, &bank, &train.pairs, &test.pairs)?
        }
        None => Trainer::new(train_config.clone(), arch, &bank, &train.pairs, &test.pairs)?,
    };
    let checkpoint = out.join(CHECKPOINT_FILE);
    let log_path = out.join(LOG_FILE);
    let every = train_config.checkpoint_every;
    trainer.run(|t, record| {
        if let Some(r) = record {
            progress(&format!(
                "epoch {} loss {:.4e} psnr {:.2} nrmse {:.4} lr {:.2e}",
                r.epoch, r.loss, r.psnr, r.nrmse, r.lr
            ));
        }
        if (every > 0 && t.epoch() % every == 0) || t.is_finished() {
            save_checkpoint_atomically(t, &checkpoint)?;
            t.log().write_csv(&log_path)?;
        }
        Ok(())
    })?;
    let last = trainer.log().last().copied();
    let summary = TrainSummary {
        checkpoint,
        log: log_path,
        epochs: trainer.epoch(),
        final_psnr: last.map(|r| r.psnr),
        final_nrmse: last.map(|r| r.nrmse),
    };
    Ok((summary, trainer.into_params()))
}

pub fn cmd_train(config: &ExperimentConfig, progress: impl FnMut(&str)) -> Result<TrainSummary> {
    let (_, train, test) = load_dataset(config)?;
    create_dir(&config.output_dir)?;
    write_json(&config.output_dir.join(CONFIG_FILE), config)?;
    let (summary, _) = train_into(
        &config.output_dir,
        &config.arch,
        &config.train,
        config.resume.as_deref(),
        &train,
        &test,
        progress,
    )?;
    Ok(summary)
}

fn load_matching(path: &Path, arch: Option<&Architecture>) -> Result<NetworkParams> {
    require_exists(path, "checkpoint")?;
    let (params, _) = load_checkpoint(path)?;
    if let Some(arch) = arch {
        if &params.arch != arch {
            return Err(Error::Architecture(format!(
                "checkpoint {} holds {:?}, config asks for {:?}",
                path.display(),
                params.arch,
                arch
            )));
        }
    }
    Ok(params)
}

#[derive(Debug, Serialize)]
pub struct DenoiseSummary {
    pub dir: PathBuf,
    pub slices: usize,
    pub mean_input_psnr: f64,
    pub mean_output_psnr: f64,
}

/// Denoises every test slice with the configured checkpoint. Writes HU
/// images (RFT1) and windowed previews of input and output.
pub fn cmd_denoise(config: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<DenoiseSummary> {
    let params = load_matching(&config.checkpoint_path(), Some(&config.arch))?;
    let (_, _, test) = load_dataset(config)?;
    let side = test.pairs.side().expect("nonempty split");
    let repr = Representation::for_architecture(&params.arch, &FilterBank::standard(), side)?;
    let engine = Engine::new(config.train.precision);
    let dir = config.output_dir.join("denoised");
    create_dir(&dir)?;
    let references = test.reference_hu();
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for ((noisy, reference), index) in test.pairs.noisy.iter().zip(&references).zip(&test.indices) {
        let out = units_to_hu(&denoise_slice(&engine, &params, &repr, noisy)?);
        let input = units_to_hu(noisy);
        write_image(&dir.join(format!("{index:04}_denoised.rft")), &out)?;
        write_pgm(&dir.join(format!("{index:04}_denoised.pgm")), &out)?;
        write_pgm(&dir.join(format!("{index:04}_quarter.pgm")), &input)?;
        write_pgm(&dir.join(format!("{index:04}_routine.pgm")), reference)?;
        before.push(MetricReport::compute(reference, &input));
        after.push(MetricReport::compute(reference, &out));
        progress(&format!("slice {index}"));
    }
    let n = before.len();
    Ok(DenoiseSummary {
        dir,
        slices: n,
        mean_input_psnr: mean_report(before.into_iter())?.psnr,
        mean_output_psnr: mean_report(after.into_iter())?.psnr,
    })
}

/// One CSV row of `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct EvaluationRow {
    pub slice: usize,
    pub method: String,
    pub mse: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub nrmse: f64,
}

#[derive(Debug, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub psnr: f64,
    pub nrmse: f64,
}

#[derive(Debug, Serialize)]
pub struct EvaluateSummary {
    pub csv: PathBuf,
    pub rows: usize,
    pub shrinkage_tau: f64,
    pub methods: Vec<MethodSummary>,
}

fn shrinkage_tau(config: &ExperimentConfig, plan: &NsctPlan, train: &LoadedSplit) -> Result<f64> {
    let k = config.shrinkage.tuning_slices.clamp(1, train.pairs.len());
    tune_shrinkage(plan, &train.pairs.noisy[..k], &train.pairs.clean[..k], &config.shrinkage.candidates)
}

/// Scores the noisy input, the shrinkage baseline and every configured
/// checkpoint on each test slice against the routine-dose reconstruction.
pub fn cmd_evaluate(config: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<EvaluateSummary> {
    let (_, train, test) = load_dataset(config)?;
    let side = test.pairs.side().expect("nonempty split");
    let bank = FilterBank::standard();
    let plan = NsctPlan::new(&bank, side)?;
    let tau = shrinkage_tau(config, &plan, &train)?;
    progress(&format!("shrinkage threshold {tau}"));

    let mut paths: Vec<PathBuf> = config.checkpoint.iter().cloned().collect();
    paths.extend(config.extra_checkpoints.iter().cloned());
    if paths.is_empty() {
        let default = config.checkpoint_path();
        if default.exists() {
            paths.push(default);
        }
    }
    let engine = Engine::new(config.train.precision);
    let mut networks = Vec::new();
    for path in &paths {
        let params = load_matching(path, None)?;
        let repr = Representation::for_architecture(&params.arch, &bank, side)?;
        networks.push((path.display().to_string(), params, repr));
    }

    let references = test.reference_hu();
    let mut rows = Vec::new();
    for ((noisy, reference), &index) in test.pairs.noisy.iter().zip(&references).zip(&test.indices) {
        let mut outputs: Vec<(String, Image)> = vec![
            ("noisy".into(), units_to_hu(noisy)),
            ("shrinkage".into(), units_to_hu(&shrinkage_slice(&plan, noisy, tau)?)),
        ];
        for (name, params, repr) in &networks {
            outputs.push((name.clone(), units_to_hu(&denoise_slice(&engine, params, repr, noisy)?)));
        }
        for (method, image) in outputs {
            let r = MetricReport::compute(reference, &image)?;
            rows.push(EvaluationRow {
                slice: index,
                method,
                mse: r.mse,
                rmse: r.rmse,
                psnr: r.psnr,
                nrmse: r.nrmse,
            });
        }
        progress(&format!("slice {index}"));
    }

    create_dir(&config.output_dir)?;
    let csv_path = config.output_dir.join("evaluation.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let mut methods: Vec<String> = Vec::new();
    for row in &rows {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
    }
    let methods = methods
        .into_iter()
        .map(|m| {
            let mine: Vec<&EvaluationRow> = rows.iter().filter(|r| r.method == m).collect();
            let n = mine.len() as f64;
            MethodSummary {
                psnr: mine.iter().map(|r| r.psnr).sum::<f64>() / n,
                nrmse: mine.iter().map(|r| r.nrmse).sum::<f64>() / n,
                method: m,
            }
        })
        .collect();
    Ok(EvaluateSummary {
        csv: csv_path,
        rows: rows.len(),
        shrinkage_tau: tau,
        methods,
    })
}

#[derive(Debug, Serialize)]
pub struct VariantOutcome {
    pub variant: String,
    pub curve: PathBuf,
    pub final_psnr: f64,
    pub final_nrmse: f64,
    pub best_psnr: f64,
}

/// Orderings reported by the comparison; informative only.
#[derive(Debug, Serialize)]
pub struct AblationObservations {
    pub wavelet_beats_image_domain: Option<bool>,
    pub full_beats_no_external_bypass: Option<bool>,
    pub block_bypass_beats_no_bypass: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct AblationSummary {
    pub dir: PathBuf,
    pub noisy_psnr: f64,
    pub iterations: usize,
    pub variants: Vec<VariantOutcome>,
    pub observations: AblationObservations,
}

/// Trains every configured variant with the same seed and budget and writes
/// one validation curve per variant plus a summary.
pub fn cmd_ablation(config: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<AblationSummary> {
    let (_, train, test) = load_dataset(config)?;
    let dir = config.output_dir.join(ABLATION_DIR);
    create_dir(&dir)?;
    write_json(&config.output_dir.join(CONFIG_FILE), config)?;
    let budget = TrainConfig {
        epochs: config.ablation.epochs,
        iterations_per_epoch: config.ablation.iterations_per_epoch,
        eval_every: 1,
        ..config.train.clone()
    };
    let noisy_psnr = mean_report(
        test.pairs
            .noisy
            .iter()
            .zip(test.reference_hu())
            .map(|(n, r)| MetricReport::compute(&r, &units_to_hu(n))),
    )?
    .psnr;
    let mut variants = Vec::new();
    for &variant in &config.ablation.variants {
        let arch = Architecture {
            variant,
            ..config.arch.clone()
        };
        let run_dir = dir.join(variant.name());
        let (_, _) = train_into(&run_dir, &arch, &budget, None, &train, &test, |line| {
            progress(&format!("{variant}: {line}"))
        })?;
        let log = TrainLog::read_csv(&run_dir.join(LOG_FILE))?;
        let curve = dir.join(format!("{}.csv", variant.name()));
        log.write_csv(&curve)?;
        let last = log
            .last()
            .ok_or_else(|| Error::Format(format!("{variant} produced an empty curve")))?;
        if log.records.iter().any(|r| !(r.loss.is_finite() && r.psnr.is_finite())) {
            return Err(Error::NonFinite {
                epoch: last.epoch,
                iteration: 0,
            });
        }
        variants.push(VariantOutcome {
            variant: variant.name().to_string(),
            curve,
            final_psnr: last.psnr,
            final_nrmse: last.nrmse,
            best_psnr: log.records.iter().map(|r| r.psnr).fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let psnr_of = |name: &str| variants.iter().find(|v| v.variant == name).map(|v| v.final_psnr);
    let beats = |a: &str, b: &str| Some(psnr_of(a)? > psnr_of(b)?);
    let observations = AblationObservations {
        wavelet_beats_image_domain: beats("wavelet_full", "image_domain"),
        full_beats_no_external_bypass: beats("wavelet_full", "no_external_bypass"),
        block_bypass_beats_no_bypass: beats("no_external_bypass", "no_bypass_at_all"),
    };
    let summary = AblationSummary {
        dir: dir.clone(),
        noisy_psnr,
        iterations: budget.total_iterations(),
        variants,
        observations,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
