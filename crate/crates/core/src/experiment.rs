//! End-to-end experiments: the library side of the `flamelut` binary.
//!
//! One run seed drives a whole experiment through independent sub-streams
//! (see [`crate::rng::derive_seed`]): the train/validation/test split, the
//! Glorot initialization and the per-epoch shuffling. The surrogate table has
//! its own `table_seed`, so every run of a comparison sees the same table.
//!
//! Every command that writes files also writes `manifest.toml`, holding the
//! effective configuration and the SHA-256 of each artifact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, generate_surrogate, load_table, Dataset, PreparedData, SurrogateProfile};
use crate::error::{Error, Result};
use crate::loss::{self, column_variances, LossMode, LossSpec};
use crate::metrics::{self, EvaluationReport, RunSummary};
use crate::network::Network;
use crate::optimizer::{self, TrainConfig, TrainingHistory, UpdateRule};
use crate::rng::{derive_seed, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn update_rule(self) -> UpdateRule {
        match self {
            OptimizerKind::Adam => UpdateRule::ADAM,
            OptimizerKind::Sgd => UpdateRule::Sgd,
        }
    }
}

/// Experiment configuration, read from TOML. Every field has a default, and
/// the defaults are the reference setup: 100 000 surrogate points, four
/// hidden tanh layers of 50, batch 1024, learning rate 0.001, 50 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Table CSV to train on. When absent the surrogate is generated.
    pub dataset: Option<PathBuf>,
    /// Surrogate profile TOML; the built-in profile when absent.
    pub profile: Option<PathBuf>,
    pub n_points: usize,
    pub table_seed: u64,
    pub hidden_layers: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub diagnostics: bool,
    pub loss: LossMode,
    pub seed: u64,
    /// Seeds for `compare`.
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            profile: None,
            n_points: 100_000,
            table_seed: 1,
            hidden_layers: vec![50; 4],
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 50,
            diagnostics: true,
            loss: LossMode::Weighted,
            seed: 1,
            seeds: (1..=10).collect(),
            out: PathBuf::from("runs"),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub loss: Option<LossMode>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub n_points: Option<usize>,
    pub seeds: Option<Vec<u64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.loss {
            self.loss = v;
        }
        if let Some(v) = o.epochs {
            self.epochs = v;
        }
        if let Some(v) = o.batch_size {
            self.batch_size = v;
        }
        if let Some(v) = o.learning_rate {
            self.learning_rate = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.dataset {
            self.dataset = Some(v.clone());
        }
        if let Some(v) = o.n_points {
            self.n_points = v;
        }
        if let Some(v) = &o.seeds {
            self.seeds = v.clone();
        }
    }

    pub fn layer_sizes(&self, input_dim: usize, output_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(output_dim))
            .collect()
    }

    pub fn surrogate_profile(&self) -> Result<SurrogateProfile> {
        match &self.profile {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::io(format!("reading profile {}", path.display()), e))?;
                SurrogateProfile::from_toml(&text)
            }
            None => Ok(SurrogateProfile::default()),
        }
    }

    /// Loads `dataset`, or generates the surrogate when none is configured.
    pub fn dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            Some(path) => load_table(path),
            None => generate_surrogate(self.n_points, self.table_seed, &self.surrogate_profile()?),
        }
    }

    fn train_config(&self, spec: LossSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            update_rule: self.optimizer.update_rule(),
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            loss_spec: spec,
            diagnostics_enabled: self.diagnostics,
        }
    }
}

/// Everything produced by one training run, before anything is written.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub loss_spec: LossSpec,
    pub network: Network,
    pub history: TrainingHistory,
    pub report: EvaluationReport,
    pub prepared: PreparedData,
}

/// The loss spec a run uses: unit weights, or `1/Var` over the training targets.
pub fn loss_spec_for(mode: LossMode, prepared: &PreparedData) -> Result<LossSpec> {
    match mode {
        LossMode::Standard => Ok(LossSpec::standard(prepared.train.target_dim())),
        LossMode::Weighted => {
            LossSpec::from_variance(prepared.train.targets(), prepared.train.target_names())
        }
    }
}

/// Split, scale, weight, initialize, train and score on the test rows.
pub fn run_single(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    seed: u64,
    mode: LossMode,
) -> Result<RunResult> {
    let split = data::split(dataset.len(), data::DEFAULT_RATIOS, seed)?;
    let prepared = PreparedData::new(dataset, split)?;
    let spec = loss_spec_for(mode, &prepared)?;
    let sizes = cfg.layer_sizes(dataset.input_dim(), dataset.target_dim());
    let net = Network::init_glorot(&sizes, derive_seed(seed, Purpose::Init))?;
    let (network, history) =
        optimizer::train(net, &prepared, &cfg.train_config(spec.clone(), seed))?;
    let report = evaluate_network(&network, &prepared, seed, mode)?;
    Ok(RunResult {
        seed,
        loss_spec: spec,
        network,
        history,
        report,
        prepared,
    })
}

pub fn evaluate_network(
    net: &Network,
    prepared: &PreparedData,
    seed: u64,
    mode: LossMode,
) -> Result<EvaluationReport> {
    let pred = net.predict(prepared.test.inputs())?;
    EvaluationReport::evaluate(
        prepared.test.targets(),
        &pred,
        prepared.test.target_names(),
        seed,
        mode,
    )
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

/// Collects files written by a command and writes their manifest.
struct ArtifactWriter {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, relative: impl AsRef<Path>, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(relative.as_ref());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, contents)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.written.push(relative.as_ref().to_path_buf());
        Ok(path)
    }

    fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<()> {
        let artifacts = self
            .written
            .iter()
            .map(|rel| {
                let path = self.root.join(rel);
                let bytes = fs::read(&path)
                    .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
                Ok(ArtifactEntry {
                    path: rel.to_string_lossy().into_owned(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            command,
            config: cfg,
            artifacts,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        let path = self.root.join("manifest.toml");
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn write_run(w: &mut ArtifactWriter, prefix: &Path, run: &RunResult) -> Result<()> {
    let names = run.prepared.train.target_names();
    w.write(prefix.join("network.txt"), &run.network.to_text())?;
    w.write(prefix.join("history.csv"), &run.history.to_csv())?;
    w.write(
        prefix.join("weights.toml"),
        &loss::weights_to_toml(&run.loss_spec, names)?,
    )?;
    w.write(prefix.join("report.toml"), &run.report.to_toml()?)?;
    let scaler = toml::to_string(&run.prepared.scaler).map_err(|e| Error::Config(e.to_string()))?;
    w.write(prefix.join("scaler.toml"), &scaler)?;
    Ok(())
}

/// Writes the surrogate table and its profile sidecar.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let profile = cfg.surrogate_profile()?;
    let table = generate_surrogate(cfg.n_points, cfg.table_seed, &profile)?;
    let mut w = ArtifactWriter::new(&cfg.out)?;
    let path = w.write("table.csv", &data::table_to_csv(&table))?;
    w.write("profile.toml", &profile.to_toml()?)?;
    w.finish("generate", cfg)?;
    Ok(path)
}

/// Trains one network with `cfg.loss` and `cfg.seed` and writes its artifacts.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunResult> {
    let dataset = cfg.dataset()?;
    let run = run_single(&dataset, cfg, cfg.seed, cfg.loss)?;
    let mut w = ArtifactWriter::new(&cfg.out)?;
    write_run(&mut w, Path::new(""), &run)?;
    w.finish("train", cfg)?;
    Ok(run)
}

/// Scores a saved network on the test rows of the split for `cfg.seed`.
pub fn cmd_eval(cfg: &ExperimentConfig, network: &Path) -> Result<EvaluationReport> {
    let net = Network::load(network)?;
    let dataset = cfg.dataset()?;
    let split = data::split(dataset.len(), data::DEFAULT_RATIOS, cfg.seed)?;
    let prepared = PreparedData::new(&dataset, split)?;
    if net.input_dim() != dataset.input_dim() || net.output_dim() != dataset.target_dim() {
        return Err(Error::Shape(format!(
            "network maps {} -> {} but the table has {} inputs and {} targets",
            net.input_dim(),
            net.output_dim(),
            dataset.input_dim(),
            dataset.target_dim()
        )));
    }
    let report = evaluate_network(&net, &prepared, cfg.seed, cfg.loss)?;
    let mut w = ArtifactWriter::new(&cfg.out)?;
    w.write("eval_report.toml", &report.to_toml()?)?;
    w.finish("eval", cfg)?;
    Ok(report)
}

/// Variance weights of the training split for `cfg.seed`, as TOML.
pub fn cmd_weights(cfg: &ExperimentConfig) -> Result<String> {
    let dataset = cfg.dataset()?;
    let split = data::split(dataset.len(), data::DEFAULT_RATIOS, cfg.seed)?;
    let prepared = PreparedData::new(&dataset, split)?;
    let spec = loss_spec_for(LossMode::Weighted, &prepared)?;
    loss::weights_to_toml(&spec, prepared.train.target_names())
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub standard: Vec<RunResult>,
    pub weighted: Vec<RunResult>,
    pub standard_summary: RunSummary,
    pub weighted_summary: RunSummary,
    /// Population variance of each target column over the whole table.
    pub variances: Vec<f64>,
    pub table: String,
    pub csv: String,
}

/// One standard and one weighted run per seed, summarized side by side.
pub fn compare(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Comparison> {
    if cfg.seeds.len() < 2 {
        return Err(Error::Config(format!(
            "compare needs at least 2 seeds, got {:?}",
            cfg.seeds
        )));
    }
    let mut standard = Vec::with_capacity(cfg.seeds.len());
    let mut weighted = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let wrap = |e: Error| Error::State(format!("run with seed {seed} failed: {e}"));
        standard.push(run_single(dataset, cfg, seed, LossMode::Standard).map_err(wrap)?);
        weighted.push(run_single(dataset, cfg, seed, LossMode::Weighted).map_err(wrap)?);
    }
    let reports = |runs: &[RunResult]| runs.iter().map(|r| r.report.clone()).collect::<Vec<_>>();
    let standard_summary = metrics::summarize_runs(&reports(&standard))?;
    let weighted_summary = metrics::summarize_runs(&reports(&weighted))?;
    let variances = column_variances(dataset.targets());
    let rows = [&standard_summary, &weighted_summary];
    let table = metrics::render_comparison(&rows, Some(&variances))?;
    let csv = metrics::comparison_csv(&rows, Some(&variances))?;
    Ok(Comparison {
        standard,
        weighted,
        standard_summary,
        weighted_summary,
        variances,
        table,
        csv,
    })
}

/// [`compare`] plus per-run artifacts under `seed-<s>/<mode>/`.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    let dataset = cfg.dataset()?;
    let cmp = compare(&dataset, cfg)?;
    let mut w = ArtifactWriter::new(&cfg.out)?;
    for run in cmp.standard.iter().chain(&cmp.weighted) {
        let prefix =
            PathBuf::from(format!("seed-{}", run.seed)).join(run.report.loss_mode.to_string());
        write_run(&mut w, &prefix, run)?;
    }
    w.write("comparison.txt", &cmp.table)?;
    w.write("comparison.csv", &cmp.csv)?;
    w.finish("compare", cfg)?;
    Ok(cmp)
}
