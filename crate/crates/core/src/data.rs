//! Lookup tables: CSV ingestion, MinMax input scaling, seeded splits and the
//! synthetic flamelet-like surrogate.
//!
//! Table CSV convention: a header row where input columns come first
//! (default `C,Z,chi`) followed by one `Y_<name>` column per species. Values
//! are written with 17 significant digits so a save/load cycle is exact.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::column_variances;
use crate::rng::{Purpose, SeedStream};

/// Tolerance on `sum_j Y_j = 1` for a row to be accepted.
pub const MASS_TOLERANCE: f64 = 1e-9;

pub const TARGET_PREFIX: &str = "Y_";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_names: Vec<String>,
    target_names: Vec<String>,
    inputs: Matrix,
    targets: Matrix,
}

impl Dataset {
    /// Checks row counts, target range and per-row mass conservation.
    pub fn new(
        input_names: Vec<String>,
        target_names: Vec<String>,
        inputs: Matrix,
        targets: Matrix,
    ) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        if input_names.len() != inputs.cols() || target_names.len() != targets.cols() {
            return Err(Error::Shape(
                "column names do not match matrix widths".into(),
            ));
        }
        if target_names.is_empty() {
            return Err(Error::Argument("dataset has no target columns".into()));
        }
        let bad = mass_violations(&targets);
        if !bad.is_empty() {
            return Err(Error::Argument(format!(
                "target rows violate mass conservation or [0, 1] range: {}",
                format_rows(&bad, 0)
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::Argument("non-finite input value".into()));
        }
        Ok(Self {
            input_names,
            target_names,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.cols()
    }

    /// The listed rows as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            input_names: self.input_names.clone(),
            target_names: self.target_names.clone(),
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
        }
    }

    /// Same targets, inputs replaced (e.g. by their scaled version).
    pub fn with_inputs(&self, inputs: Matrix) -> Result<Dataset> {
        if inputs.shape() != self.inputs.shape() {
            return Err(Error::Shape("replacement inputs differ in shape".into()));
        }
        Ok(Dataset {
            inputs,
            ..self.clone()
        })
    }
}

fn mass_violations(targets: &Matrix) -> Vec<usize> {
    (0..targets.rows())
        .filter(|&r| {
            let row = targets.row(r);
            let sum: f64 = row.iter().sum();
            !(sum - 1.0).abs().le(&MASS_TOLERANCE) || row.iter().any(|v| !(0.0..=1.0).contains(v))
        })
        .collect()
}

/// Shows up to a handful of 1-based row numbers, offset by `offset` (the header).
fn format_rows(rows: &[usize], offset: usize) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(10)
        .map(|r| (r + 1 + offset).to_string())
        .collect();
    if rows.len() > 10 {
        format!("{} and {} more", shown.join(", "), rows.len() - 10)
    } else {
        shown.join(", ")
    }
}

/// Reads a table CSV. Row numbers in errors count the header as line 1.
pub fn load_table(path: &Path) -> Result<Dataset> {
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let first_target = header
        .iter()
        .position(|h| h.starts_with(TARGET_PREFIX))
        .ok_or_else(|| {
            ingest(format!(
                "no `{TARGET_PREFIX}<name>` target columns in header"
            ))
        })?;
    if first_target == 0 {
        return Err(ingest(
            "header has no input columns before the targets".into(),
        ));
    }
    if let Some(h) = header[first_target..]
        .iter()
        .find(|h| !h.starts_with(TARGET_PREFIX))
    {
        return Err(ingest(format!(
            "input column `{h}` appears after the target columns"
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(ingest(format!("duplicate column `{dup}`")));
    }
    let input_names = header[..first_target].to_vec();
    let target_names: Vec<String> = header[first_target..]
        .iter()
        .map(|h| h[TARGET_PREFIX.len()..].to_string())
        .collect();
    let (d_in, d_out) = (input_names.len(), target_names.len());

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ingest(format!("line {line}: {e}")))?;
        if record.len() != d_in + d_out {
            return Err(ingest(format!(
                "line {line}: expected {} fields, found {}",
                d_in + d_out,
                record.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| ingest(format!("line {line}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(ingest(format!("line {line}: non-finite value `{field}`")));
            }
            if c < d_in {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
        rows += 1;
    }
    let targets = Matrix::from_vec(rows, d_out, targets)?;
    let bad = mass_violations(&targets);
    if !bad.is_empty() {
        return Err(ingest(format!(
            "species mass fractions must lie in [0, 1] and sum to 1 within {MASS_TOLERANCE:e}; \
             offending lines: {}",
            format_rows(&bad, 1)
        )));
    }
    Dataset::new(
        input_names,
        target_names,
        Matrix::from_vec(rows, d_in, inputs)?,
        targets,
    )
}

pub fn table_to_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    let header: Vec<String> = dataset
        .input_names
        .iter()
        .cloned()
        .chain(
            dataset
                .target_names
                .iter()
                .map(|n| format!("{TARGET_PREFIX}{n}")),
        )
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..dataset.len() {
        let fields: Vec<String> = dataset
            .inputs
            .row(r)
            .iter()
            .chain(dataset.targets.row(r))
            .map(|v| format!("{v:.16e}"))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_table(path: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::write(path, table_to_csv(dataset))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Per-feature minimum and maximum over the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(dataset: &Dataset, train_indices: &[usize]) -> Result<Self> {
        if train_indices.len() < 2 {
            return Err(Error::Argument(format!(
                "scaler needs at least 2 training rows, got {}",
                train_indices.len()
            )));
        }
        let d = dataset.input_dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for &i in train_indices {
            for (c, &v) in dataset.inputs.row(i).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        for c in 0..d {
            if max[c] <= min[c] {
                return Err(Error::DegenerateFeature {
                    feature: dataset.input_names[c].clone(),
                    value: min[c],
                });
            }
        }
        Ok(Self { min, max })
    }

    /// `(x - min) / (max - min)`, unclipped.
    pub fn apply(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check(inputs)?;
        let mut out = inputs.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.min[c]) / (self.max[c] - self.min[c]);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, scaled: &Matrix) -> Result<Matrix> {
        self.check(scaled)?;
        let mut out = scaled.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * (self.max[c] - self.min[c]) + self.min[c];
            }
        }
        Ok(out)
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.min.len() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, got {}",
                self.min.len(),
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Disjoint train/validation/test row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Shuffles `0..n` with the split stream of `seed`, then cuts it into
/// `round(n * train)`, `round(n * validation)` and the remainder.
pub fn split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<SplitDataset> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be in [0, 1] and sum to 1"
        )));
    }
    if n < 10 {
        return Err(Error::Argument(format!(
            "cannot split {n} rows (need at least 10)"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    SeedStream::for_purpose(seed, Purpose::Split).shuffle(&mut idx);
    let n_train = (n as f64 * a).round() as usize;
    let n_val = ((n as f64 * b).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Ok(SplitDataset {
        train: idx,
        validation,
        test,
        seed,
    })
}

/// Scaled train/validation/test subsets of one table.
///
/// The scaler is fitted on the training rows only and applied to all three
/// subsets. Targets are never rescaled.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
    pub split: SplitDataset,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, split: SplitDataset) -> Result<Self> {
        let n = dataset.len();
        if split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .any(|&i| i >= n)
        {
            return Err(Error::Argument(
                "split refers to rows outside the dataset".into(),
            ));
        }
        let scaler = Scaler::fit(dataset, &split.train)?;
        let part = |idx: &[usize]| -> Result<Dataset> {
            let sub = dataset.subset(idx);
            let scaled = scaler.apply(sub.inputs())?;
            sub.with_inputs(scaled)
        };
        Ok(Self {
            train: part(&split.train)?,
            validation: part(&split.validation)?,
            test: part(&split.test)?,
            scaler,
            split,
        })
    }
}

/// One species of the surrogate table.
///
/// Unnormalized shape:
/// `g = amplitude * exp(-(Z - center)^2 / (2 width^2))
///      * sigmoid(steepness * (C - midpoint)) * exp(-decay * chi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpecies {
    pub name: String,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub steepness: f64,
    pub midpoint: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateProfile {
    /// Required `max Var / min Var` over the generated target columns.
    pub min_variance_spread: f64,
    pub species: Vec<SurrogateSpecies>,
}

/// `chi` is log-uniform on this range before being mapped onto `[0, 1]`.
pub const CHI_LOG10_RANGE: (f64, f64) = (-2.0, 2.0);

impl Default for SurrogateProfile {
    fn default() -> Self {
        let sp =
            |name: &str, amplitude, center, width, steepness, midpoint, decay| SurrogateSpecies {
                name: name.to_string(),
                amplitude,
                center,
                width,
                steepness,
                midpoint,
                decay,
            };
        Self {
            min_variance_spread: 1e3,
            species: vec![
                sp("N2", 1.0, 0.0, 0.49, 0.0, 0.5, 0.0),
                sp("O2", 0.6, 0.0, 0.42, -2.4, 0.6, 0.0),
                sp("H2O", 0.5, 0.35, 0.35, 3.0, 0.4, 0.3),
                sp("H2", 0.4, 1.0, 0.42, -1.8, 0.7, 0.0),
                sp("OH", 0.12, 0.4, 0.252, 3.6, 0.5, 1.0),
                sp("O", 0.16, 0.3, 0.28, 3.0, 0.6, 1.5),
                sp("H", 0.06, 0.55, 0.28, 2.4, 0.5, 1.2),
                sp("HO2", 0.08, 0.2, 0.28, -2.4, 0.3, 2.0),
                sp("H2O2", 0.042, 0.25, 0.28, -2.4, 0.3, 2.5),
            ],
        }
    }
}

impl SurrogateProfile {
    pub fn validate(&self) -> Result<()> {
        if self.species.len() < 2 {
            return Err(Error::Profile("at least two species are required".into()));
        }
        let mut names = HashSet::new();
        for s in &self.species {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Profile(format!("duplicate species `{}`", s.name)));
            }
            let finite = [
                s.amplitude,
                s.center,
                s.width,
                s.steepness,
                s.midpoint,
                s.decay,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !finite || s.amplitude <= 0.0 || s.width <= 0.0 {
                return Err(Error::Profile(format!(
                    "species `{}` needs finite parameters with amplitude > 0 and width > 0",
                    s.name
                )));
            }
        }
        if !(self.min_variance_spread.is_finite() && self.min_variance_spread >= 1.0) {
            return Err(Error::Profile("min_variance_spread must be >= 1".into()));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    /// Normalized mass fractions at one point of the unit cube.
    pub fn evaluate(&self, c: f64, z: f64, chi: f64) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .species
            .iter()
            .map(|s| {
                let dz = z - s.center;
                let bump = (-dz * dz / (2.0 * s.width * s.width)).exp();
                let ramp = 1.0 / (1.0 + (-s.steepness * (c - s.midpoint)).exp());
                let decay = (-s.decay * chi).exp();
                s.amplitude * bump * ramp * decay
            })
            .collect();
        let total: f64 = g.iter().sum();
        for v in &mut g {
            *v /= total;
        }
        g
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("surrogate profile", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let profile: Self =
            toml::from_str(text).map_err(|e| Error::format("surrogate profile", e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Samples `n_points` rows of the surrogate table.
///
/// Per row, three uniforms are drawn in the order `C`, `Z`, `u`; the
/// dissipation rate is `chi_raw = 10^(-2 + 4u)` and the stored `chi` column is
/// its log-normalized position `(log10 chi_raw + 2) / 4`.
pub fn generate_surrogate(
    n_points: usize,
    seed: u64,
    profile: &SurrogateProfile,
) -> Result<Dataset> {
    if n_points < 100 {
        return Err(Error::Argument(format!(
            "surrogate needs at least 100 points, got {n_points}"
        )));
    }
    profile.validate()?;
    let mut rng = SeedStream::for_purpose(seed, Purpose::Surrogate);
    let d = profile.species.len();
    let mut inputs = Vec::with_capacity(n_points * 3);
    let mut targets = Vec::with_capacity(n_points * d);
    let (lo, hi) = CHI_LOG10_RANGE;
    for _ in 0..n_points {
        let c = rng.uniform01();
        let z = rng.uniform01();
        let chi_raw = 10f64.powf(lo + (hi - lo) * rng.uniform01());
        let chi = (chi_raw.log10() - lo) / (hi - lo);
        inputs.extend_from_slice(&[c, z, chi]);
        targets.extend(profile.evaluate(c, z, chi));
    }
    let targets = Matrix::from_vec(n_points, d, targets)?;
    let vars = column_variances(&targets);
    let max = vars.iter().copied().fold(0.0, f64::max);
    let min = vars.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && max / min >= profile.min_variance_spread) {
        return Err(Error::Profile(format!(
            "column variances span a factor of {:.3e}, below the required {:.3e}",
            max / min,
            profile.min_variance_spread
        )));
    }
    Dataset::new(
        vec!["C".into(), "Z".into(), "chi".into()],
        profile.names(),
        Matrix::from_vec(n_points, 3, inputs)?,
        targets,
    )
}
