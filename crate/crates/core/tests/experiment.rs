use std::fs;
use std::path::Path;
use std::process::Command;

use flamelut::data::{split, DEFAULT_RATIOS};
use flamelut::experiment::{self, ExperimentConfig};
use flamelut::loss::{load_weights, weights_from_toml};
use flamelut::metrics::EvaluationReport;
use flamelut::optimizer::{evaluate_per_target, train};
use flamelut::{Dataset, LossMode, LossSpec, Matrix, Network, PreparedData, TrainConfig};
use sha2::{Digest, Sha256};

fn small_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        n_points: 2000,
        hidden_layers: vec![8, 8],
        epochs: 3,
        batch_size: 128,
        seeds: vec![1, 2],
        out: out.to_path_buf(),
        ..Default::default()
    }
}

const RUN_FILES: [&str; 6] = [
    "network.txt",
    "history.csv",
    "weights.toml",
    "report.toml",
    "scaler.toml",
    "manifest.toml",
];

#[test]
fn train_twice_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(&dir.path().join("a"));
    let mut b = a.clone();
    b.out = dir.path().join("b");
    experiment::cmd_train(&a).unwrap();
    experiment::cmd_train(&b).unwrap();
    for f in RUN_FILES.iter().filter(|f| **f != "manifest.toml") {
        let x = fs::read(a.out.join(f)).unwrap();
        let y = fs::read(b.out.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
}

#[test]
fn different_seeds_give_different_networks() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(&dir.path().join("a"));
    let mut b = a.clone();
    b.out = dir.path().join("b");
    b.seed = 2;
    let ra = experiment::cmd_train(&a).unwrap();
    let rb = experiment::cmd_train(&b).unwrap();
    assert_ne!(ra.network, rb.network);
}

#[test]
fn manifest_checksums_match_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    experiment::cmd_train(&cfg).unwrap();
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let arts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 5);
    for a in arts {
        let path = a["path"].as_str().unwrap();
        let bytes = fs::read(dir.path().join(path)).unwrap();
        assert_eq!(
            a["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }
    let echoed =
        ExperimentConfig::from_toml(&toml::to_string(&manifest["config"]).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn standard_run_writes_unit_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.loss = LossMode::Standard;
    experiment::cmd_train(&cfg).unwrap();
    let (names, spec) = load_weights(&dir.path().join("weights.toml")).unwrap();
    assert_eq!(names.len(), 9);
    assert_eq!(spec.mode(), LossMode::Standard);
    assert!(spec.weights().iter().all(|w| *w == 1.0));
}

#[test]
fn eval_reproduces_the_training_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("train"));
    let run = experiment::cmd_train(&cfg).unwrap();
    let mut eval_cfg = cfg.clone();
    eval_cfg.out = dir.path().join("eval");
    let report = experiment::cmd_eval(&eval_cfg, &cfg.out.join("network.txt")).unwrap();
    assert_eq!(report, run.report);
    assert_eq!(
        EvaluationReport::load(&eval_cfg.out.join("eval_report.toml")).unwrap(),
        report
    );
}

#[test]
fn weights_command_uses_the_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let text = experiment::cmd_weights(&cfg).unwrap();
    let (_, spec) = weights_from_toml(&text).unwrap();
    let ds = cfg.dataset().unwrap();
    let prepared =
        PreparedData::new(&ds, split(ds.len(), DEFAULT_RATIOS, cfg.seed).unwrap()).unwrap();
    let expected =
        LossSpec::from_variance(prepared.train.targets(), prepared.train.target_names()).unwrap();
    assert_eq!(spec, expected);
}

#[test]
fn compare_with_two_seeds_trains_four_networks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cmp = experiment::cmd_compare(&cfg).unwrap();
    assert_eq!(cmp.standard.len() + cmp.weighted.len(), 4);
    for seed in [1, 2] {
        for mode in ["standard", "weighted"] {
            let run = dir.path().join(format!("seed-{seed}")).join(mode);
            assert!(run.join("network.txt").is_file());
            assert!(run.join("report.toml").is_file());
        }
    }
    let table = fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    assert_eq!(table, cmp.table);
    assert!(table.contains("H2O2"));
    assert!(table.contains("standard") && table.contains("weighted"));
    assert!(dir.path().join("comparison.csv").is_file());
}

#[test]
fn missing_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.dataset = Some(dir.path().join("absent.csv"));
    let err = experiment::cmd_train(&cfg).unwrap_err();
    assert!(err.to_string().contains("absent.csv"), "{err}");
}

#[test]
fn smooth_two_species_problem_converges() {
    let n = 200;
    let mut x = Vec::with_capacity(2 * n);
    let mut t = Vec::with_capacity(2 * n);
    for i in 0..n {
        let a = (i % 20) as f64 / 19.0;
        let b = (i / 20) as f64 / 9.0;
        let y = 0.2 + 0.6 / (1.0 + (-(3.0 * a - 2.0 * b)).exp());
        x.extend_from_slice(&[a, b]);
        t.extend_from_slice(&[y, 1.0 - y]);
    }
    let ds = Dataset::new(
        vec!["a".into(), "b".into()],
        vec!["P".into(), "Q".into()],
        Matrix::from_vec(n, 2, x).unwrap(),
        Matrix::from_vec(n, 2, t).unwrap(),
    )
    .unwrap();
    let prepared = PreparedData::new(&ds, split(n, DEFAULT_RATIOS, 3).unwrap()).unwrap();
    let net = Network::init_glorot(&[2, 10, 2], 3).unwrap();
    let mut config = TrainConfig::new(LossSpec::standard(2), 3);
    config.epochs = 200;
    config.batch_size = 16;
    let before = evaluate_per_target(&net, &prepared.train)
        .unwrap()
        .iter()
        .sum::<f64>();
    let (net, history) = train(net, &prepared, &config).unwrap();
    let after = evaluate_per_target(&net, &prepared.train)
        .unwrap()
        .iter()
        .sum::<f64>();
    assert_eq!(history.epochs.len(), 200);
    assert!(after < 1e-3, "training loss {before} -> {after}");
    assert!(after < before);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flamelut"))
}

#[test]
fn cli_train_honours_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    let mut cfg = small_config(&dir.path().join("ignored"));
    cfg.epochs = 9;
    fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let out = dir.path().join("run");
    let status = bin()
        .args(["train", "--config"])
        .arg(&cfg_path)
        .args([
            "--epochs",
            "2",
            "--loss",
            "standard",
            "--seed",
            "5",
            "--batch-size",
            "256",
            "--lr",
            "0.002",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 2 * 9);
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    for expected in [
        "seed = 5",
        "loss = \"standard\"",
        "batch_size = 256",
        "learning_rate = 0.002",
    ] {
        assert!(
            manifest.contains(expected),
            "{expected} missing from\n{manifest}"
        );
    }
}

#[test]
fn cli_generate_then_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--n-points", "500", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = dir.path().join("table.csv");
    assert!(table.is_file() && dir.path().join("profile.toml").is_file());
    let out = bin()
        .args(["weights", "--dataset"])
        .arg(&table)
        .output()
        .unwrap();
    assert!(out.status.success());
    let (names, spec) = weights_from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(names.len(), 9);
    assert_eq!(spec.mode(), LossMode::Weighted);
}

#[test]
fn cli_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "--dataset"])
        .arg(dir.path().join("missing.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = bin().args(["train", "--loss", "huber"]).output().unwrap();
    assert!(!out.status.success());

    let out = bin()
        .args(["compare", "--seeds", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2 seeds"));

    let out = bin()
        .args(["generate", "--n-points", "10", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn reference_config_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}
