use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctdenoise::cli::{load_split, EvaluationRow, ExperimentConfig, Manifest, Split, CHECKPOINT_FILE};
use ctdenoise::io::{read_image, save_weights};
use ctdenoise::metrics::psnr;
use ctdenoise::nn::{Architecture, NetworkParams, Variant};
use ctdenoise::nsct::{atrous_lowpass, FilterBank};
use ctdenoise::pipeline::{mu_to_units, units_to_hu};
use ctdenoise::train::{TrainConfig, TrainLog, Trainer};

fn small_config(root: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        seed: 5,
        dataset_dir: root.join("data"),
        output_dir: root.join("run"),
        split: Split { train: 6, test: 2 },
        arch: Architecture::new(4, 1, Variant::WaveletFull),
        train: TrainConfig {
            epochs: 2,
            iterations_per_epoch: 3,
            batch_size: 4,
            patch_side: 16,
            subset_size: 4,
            subset_interval: 1,
            ..TrainConfig::desk_scale()
        },
        ..ExperimentConfig::default()
    };
    config.simulation.side = 64;
    config.simulation.n_angles = 90;
    config.shrinkage.tuning_slices = 2;
    config.ablation.epochs = 2;
    config.ablation.iterations_per_epoch = 2;
    config
}

fn write_config(root: &Path, config: &ExperimentConfig) -> PathBuf {
    let path = root.join(format!("config_{}.json", config.output_dir.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn ctdenoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctdenoise"))
        .args(args)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> serde_json::Value {
    let out = ctdenoise(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn simulate(root: &Path, config: &ExperimentConfig) {
    let path = write_config(root, config);
    let data = config.dataset_dir.to_str().unwrap();
    run_ok(&["simulate", "--config", path.to_str().unwrap(), "--out", data]);
}

#[test]
fn simulate_writes_three_files_per_slice_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    simulate(dir.path(), &config);
    let manifest = Manifest::load(&config.dataset_dir).unwrap();
    assert_eq!(manifest.slices.len(), 8);
    let mut rft = 0;
    for split in ["train", "test"] {
        rft += std::fs::read_dir(config.dataset_dir.join(split)).unwrap().count();
    }
    assert_eq!(rft, 24);
    assert_eq!(manifest.dose.routine_b, config.simulation.dose.b);
    assert_eq!(manifest.dose.quarter_b, config.simulation.dose.b / 4.0);
    assert_eq!(manifest.seed, 5);
    // the configuration is echoed with the output directory it was run with
    assert_eq!(manifest.config.simulation, config.simulation);
    assert_eq!(manifest.config.output_dir, config.dataset_dir);
    let first = read_image(&config.dataset_dir.join(&manifest.slices[0].quarter)).unwrap();
    assert_eq!(first.dims(), (64, 64));
}

#[test]
fn train_denoise_evaluate_and_ablate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = small_config(root);
    simulate(root, &config);
    let path = write_config(root, &config);
    let cfg = path.to_str().unwrap();

    let summary = run_ok(&["train", "--config", cfg]);
    assert_eq!(summary["epochs"], 2);
    let log = TrainLog::read_csv(&config.output_dir.join("train_log.csv")).unwrap();
    assert!(log.records.windows(2).all(|w| w[0].epoch < w[1].epoch));
    assert!(config.output_dir.join(CHECKPOINT_FILE).exists());
    let echoed: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(config.output_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed, config.clone().resolve(None, None).unwrap());

    let denoised = run_ok(&["denoise", "--config", cfg]);
    assert_eq!(denoised["slices"], 2);
    let manifest = Manifest::load(&config.dataset_dir).unwrap();
    let index = manifest.slices.iter().find(|s| s.split == "test").unwrap().index;
    let out = read_image(&config.output_dir.join(format!("denoised/{index:04}_denoised.rft"))).unwrap();
    assert_eq!(out.dims(), (64, 64));
    assert!(config.output_dir.join(format!("denoised/{index:04}_denoised.pgm")).exists());

    let evaluation = run_ok(&["evaluate", "--config", cfg]);
    assert_eq!(evaluation["rows"], 2 * 3);
    let mut reader = csv::Reader::from_path(config.output_dir.join("evaluation.csv")).unwrap();
    let rows: Vec<EvaluationRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let noisy_row = rows.iter().find(|r| r.method == "noisy" && r.slice == index).unwrap();
    let slice = manifest.slices.iter().find(|s| s.index == index).unwrap();
    let routine = units_to_hu(&mu_to_units(&read_image(&config.dataset_dir.join(&slice.routine)).unwrap()));
    let quarter = units_to_hu(&mu_to_units(&read_image(&config.dataset_dir.join(&slice.quarter)).unwrap()));
    assert!((noisy_row.psnr - psnr(&routine, &quarter).unwrap()).abs() <= 1e-12);

    let ablation = run_ok(&["ablation", "--config", cfg, "--out", root.join("abl").to_str().unwrap()]);
    let variants = ablation["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 4);
    for v in Variant::ALL {
        let curve = root.join("abl/ablation").join(format!("{}.csv", v.name()));
        let text = std::fs::read_to_string(&curve).unwrap();
        assert!(text.starts_with("epoch,loss,psnr,nrmse,lr\n"), "{text}");
        assert_eq!(TrainLog::read_csv(&curve).unwrap().records.len(), 2);
    }
    assert!(root.join("abl/ablation/summary.json").exists());
}

#[test]
fn zero_weight_checkpoint_returns_the_lowpass_band() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut config = small_config(root);
    simulate(root, &config);
    let weights = root.join("zero.wdn");
    save_weights(&weights, &NetworkParams::zeros(&config.arch).unwrap(), serde_json::Value::Null).unwrap();
    config.checkpoint = Some(weights);
    let path = write_config(root, &config);
    run_ok(&["denoise", "--config", path.to_str().unwrap()]);
    let manifest = Manifest::load(&config.dataset_dir).unwrap();
    for slice in manifest.slices.iter().filter(|s| s.split == "test") {
        let input = mu_to_units(&read_image(&config.dataset_dir.join(&slice.quarter)).unwrap());
        let expected = units_to_hu(&atrous_lowpass(&input, &FilterBank::standard()));
        let out = read_image(&config.output_dir.join(format!("denoised/{:04}_denoised.rft", slice.index))).unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() <= 1e-8);
    }
}

#[test]
fn failures_print_one_json_line_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = small_config(root);
    let path = write_config(root, &config);

    // no dataset yet
    let out = ctdenoise(&["train", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    let error: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(error["error"], "config");

    let out = ctdenoise(&["frobnicate"]);
    assert!(!out.status.success());
    let error: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(error["error"], "usage");

    std::fs::write(root.join("bad.json"), r#"{"sed": 3}"#).unwrap();
    let out = ctdenoise(&["simulate", "--config", root.join("bad.json").to_str().unwrap()]);
    let error: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(error["error"], "config");

    // a checkpoint for another architecture
    simulate(root, &config);
    let other = root.join("other.wdn");
    let arch = Architecture::new(4, 1, Variant::ImageDomain);
    save_weights(&other, &NetworkParams::zeros(&arch).unwrap(), serde_json::Value::Null).unwrap();
    let mismatched = ExperimentConfig {
        checkpoint: Some(other),
        ..config
    };
    let path = write_config(root, &mismatched);
    let out = ctdenoise(&["denoise", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let error: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(error["error"], "architecture");
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut full = small_config(root);
    full.train.epochs = 4;
    full.train.checkpoint_every = 1;
    simulate(root, &full);
    let path = write_config(root, &full);
    run_ok(&["train", "--config", path.to_str().unwrap()]);

    // two epochs through the library, then the command continues to four
    let partial_dir = root.join("part");
    std::fs::create_dir_all(&partial_dir).unwrap();
    let cfg = full.clone().resolve(None, None).unwrap();
    let manifest = Manifest::load(&cfg.dataset_dir).unwrap();
    let train = load_split(&cfg.dataset_dir, &manifest, "train").unwrap();
    let test = load_split(&cfg.dataset_dir, &manifest, "test").unwrap();
    let bank = FilterBank::standard();
    let mut trainer = Trainer::new(cfg.train.clone(), &cfg.arch, &bank, &train.pairs, &test.pairs).unwrap();
    trainer.run_epoch().unwrap();
    trainer.run_epoch().unwrap();
    let mid = partial_dir.join("mid.wdn");
    trainer.save_checkpoint(&mid).unwrap();
    drop(trainer);

    let resumed = ExperimentConfig {
        output_dir: partial_dir.clone(),
        resume: Some(mid),
        ..full.clone()
    };
    let resumed_path = write_config(root, &resumed);
    run_ok(&["train", "--config", resumed_path.to_str().unwrap()]);
    let a = std::fs::read(full.output_dir.join(CHECKPOINT_FILE)).unwrap();
    let b = std::fs::read(partial_dir.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(full.output_dir.join("train_log.csv")).unwrap(),
        std::fs::read(partial_dir.join("train_log.csv")).unwrap()
    );
}
