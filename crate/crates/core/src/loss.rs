//! Per-target MSE, unit and variance-based target weighting.
//!
//! The multivariate loss is `sum_j w_j L_j` with `L_j` the univariate MSE of
//! target `j`. Standard optimization uses `w_j = 1`; the weighted variant uses
//! `w_j = 1 / Var(Y_j)` (population variance over the training targets), which
//! brings every target's contribution to the same scale.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Columns with population variance at or below this are rejected.
pub const VARIANCE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    Standard,
    Weighted,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Standard => "standard",
            LossMode::Weighted => "weighted",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(LossMode::Standard),
            "weighted" => Ok(LossMode::Weighted),
            other => Err(Error::Config(format!(
                "unknown loss mode `{other}` (expected standard or weighted)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    mode: LossMode,
    weights: Vec<f64>,
}

impl LossSpec {
    pub fn standard(targets: usize) -> Self {
        Self {
            mode: LossMode::Standard,
            weights: vec![1.0; targets],
        }
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Argument("weight vector is empty".into()));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Argument(format!(
                "weight {j} is {w}; weights must be positive and finite"
            )));
        }
        Ok(Self {
            mode: LossMode::Weighted,
            weights,
        })
    }

    /// Weighted spec with `w_j = 1 / Var(Y_j)` over the given targets.
    pub fn from_variance(targets: &Matrix, names: &[String]) -> Result<Self> {
        Self::weighted(variance_weights_named(targets, names)?)
    }

    pub fn mode(&self) -> LossMode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn targets(&self) -> usize {
        self.weights.len()
    }

    /// Same mode, weight `j` multiplied by `factor`.
    pub fn with_scaled_weight(&self, j: usize, factor: f64) -> Result<Self> {
        let mut weights = self.weights.clone();
        let w = weights
            .get_mut(j)
            .ok_or_else(|| Error::Argument(format!("weight index {j} out of range")))?;
        *w *= factor;
        let mut spec = Self::weighted(weights)?;
        spec.mode = self.mode;
        Ok(spec)
    }
}

fn check_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "targets {}x{} vs predictions {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `L_j = (1/N) sum_i (y_ij - yhat_ij)^2` for every column `j`.
///
/// Rows are accumulated in order, so the result does not depend on how the
/// caller later combines the columns.
pub fn per_target_mse(y_true: &Matrix, y_pred: &Matrix) -> Result<Vec<f64>> {
    check_same_shape(y_true, y_pred)?;
    let n = y_true.rows();
    if n == 0 {
        return Err(Error::Argument("per-target MSE of an empty batch".into()));
    }
    let mut sums = vec![0.0; y_true.cols()];
    for r in 0..n {
        for ((s, t), p) in sums.iter_mut().zip(y_true.row(r)).zip(y_pred.row(r)) {
            let e = t - p;
            *s += e * e;
        }
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// `sum_j w_j L_j`.
pub fn total_loss(per_target: &[f64], spec: &LossSpec) -> Result<f64> {
    if per_target.len() != spec.targets() {
        return Err(Error::Shape(format!(
            "{} per-target losses but {} weights",
            per_target.len(),
            spec.targets()
        )));
    }
    Ok(per_target
        .iter()
        .zip(spec.weights())
        .map(|(l, w)| w * l)
        .sum())
}

/// `dL/dyhat` with entry `(i, j) = w_j * (2/N) * (yhat_ij - y_ij)`.
pub fn loss_output_gradient(y_true: &Matrix, y_pred: &Matrix, spec: &LossSpec) -> Result<Matrix> {
    loss_output_gradient_scaled(y_true, y_pred, spec, y_true.rows())
}

/// Like [`loss_output_gradient`] but normalized by `normalizer` instead of the
/// batch size, so a large set can be processed in chunks and the chunk
/// gradients summed.
pub fn loss_output_gradient_scaled(
    y_true: &Matrix,
    y_pred: &Matrix,
    spec: &LossSpec,
    normalizer: usize,
) -> Result<Matrix> {
    check_same_shape(y_true, y_pred)?;
    if y_true.cols() != spec.targets() {
        return Err(Error::Shape(format!(
            "{} target columns but {} weights",
            y_true.cols(),
            spec.targets()
        )));
    }
    if normalizer == 0 {
        return Err(Error::Argument("loss gradient of an empty batch".into()));
    }
    let scale = 2.0 / normalizer as f64;
    let mut g = Matrix::zeros(y_true.rows(), y_true.cols());
    for r in 0..y_true.rows() {
        let (t, p) = (y_true.row(r), y_pred.row(r));
        for (c, out) in g.row_mut(r).iter_mut().enumerate() {
            *out = spec.weights()[c] * (scale * (p[c] - t[c]));
        }
    }
    Ok(g)
}

/// Population variance `sum_i (y_ij - mean_j)^2 / N` per column.
pub fn column_variances(targets: &Matrix) -> Vec<f64> {
    let n = targets.rows() as f64;
    let mut means = vec![0.0; targets.cols()];
    for r in 0..targets.rows() {
        for (m, v) in means.iter_mut().zip(targets.row(r)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; targets.cols()];
    for r in 0..targets.rows() {
        for ((s, v), m) in vars.iter_mut().zip(targets.row(r)).zip(&means) {
            let d = v - m;
            *s += d * d;
        }
    }
    vars.into_iter().map(|s| s / n).collect()
}

/// `w_j = 1 / Var(Y_j)`.
pub fn variance_weights(targets: &Matrix) -> Result<Vec<f64>> {
    let names: Vec<String> = (0..targets.cols()).map(|j| format!("#{j}")).collect();
    variance_weights_named(targets, &names)
}

pub fn variance_weights_named(targets: &Matrix, names: &[String]) -> Result<Vec<f64>> {
    if targets.rows() < 2 {
        return Err(Error::Argument(format!(
            "variance weights need at least 2 rows, got {}",
            targets.rows()
        )));
    }
    if names.len() != targets.cols() {
        return Err(Error::Shape(format!(
            "{} names for {} target columns",
            names.len(),
            targets.cols()
        )));
    }
    column_variances(targets)
        .into_iter()
        .zip(names)
        .map(|(var, name)| {
            if var.is_nan() || var <= VARIANCE_FLOOR {
                Err(Error::DegenerateTarget {
                    column: name.clone(),
                    variance: var,
                })
            } else {
                Ok(1.0 / var)
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    mode: LossMode,
    target: Vec<WeightEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightEntry {
    name: String,
    weight: f64,
}

/// Serializes target names and weights as TOML.
pub fn weights_to_toml(spec: &LossSpec, names: &[String]) -> Result<String> {
    if names.len() != spec.targets() {
        return Err(Error::Shape(format!(
            "{} names for {} weights",
            names.len(),
            spec.targets()
        )));
    }
    let file = WeightsFile {
        mode: spec.mode,
        target: names
            .iter()
            .zip(spec.weights())
            .map(|(n, &w)| WeightEntry {
                name: n.clone(),
                weight: w,
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| Error::format("weights", e.to_string()))
}

/// Parses a weights file, returning the names in file order and the spec.
pub fn weights_from_toml(text: &str) -> Result<(Vec<String>, LossSpec)> {
    let file: WeightsFile =
        toml::from_str(text).map_err(|e| Error::format("weights", e.to_string()))?;
    let names = file.target.iter().map(|e| e.name.clone()).collect();
    let weights: Vec<f64> = file.target.iter().map(|e| e.weight).collect();
    let spec = match file.mode {
        LossMode::Standard => {
            if weights.iter().any(|&w| w != 1.0) {
                return Err(Error::format(
                    "weights",
                    "standard mode requires unit weights",
                ));
            }
            LossSpec::standard(weights.len())
        }
        LossMode::Weighted => LossSpec::weighted(weights)?,
    };
    Ok((names, spec))
}

pub fn save_weights(path: &Path, spec: &LossSpec, names: &[String]) -> Result<()> {
    std::fs::write(path, weights_to_toml(spec, names)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_weights(path: &Path) -> Result<(Vec<String>, LossSpec)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    weights_from_toml(&text)
}
