//! Per-target R² and multi-run summaries.
//!
//! R² is stored on the unit scale and shown in percent. Negative values are
//! kept as-is in every machine-readable export; only the human-facing table
//! masks them as `<0`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::{per_target_mse, LossMode};

/// `R²_j = 1 - SS_res / SS_tot` per column, against the column's own mean.
pub fn r_squared(y_true: &Matrix, y_pred: &Matrix) -> Result<Vec<f64>> {
    let names: Vec<String> = (0..y_true.cols()).map(|j| format!("#{j}")).collect();
    r_squared_named(y_true, y_pred, &names)
}

pub fn r_squared_named(y_true: &Matrix, y_pred: &Matrix, names: &[String]) -> Result<Vec<f64>> {
    if y_true.shape() != y_pred.shape() {
        return Err(Error::Shape(format!(
            "targets {}x{} vs predictions {}x{}",
            y_true.rows(),
            y_true.cols(),
            y_pred.rows(),
            y_pred.cols()
        )));
    }
    if names.len() != y_true.cols() {
        return Err(Error::Shape(
            "one name per target column is required".into(),
        ));
    }
    let n = y_true.rows();
    if n == 0 {
        return Err(Error::Argument("R² of an empty evaluation set".into()));
    }
    (0..y_true.cols())
        .map(|j| {
            let mean = (0..n).map(|i| y_true.get(i, j)).sum::<f64>() / n as f64;
            let mut ss_res = 0.0;
            let mut ss_tot = 0.0;
            for i in 0..n {
                let t = y_true.get(i, j);
                let e = t - y_pred.get(i, j);
                let d = t - mean;
                ss_res += e * e;
                ss_tot += d * d;
            }
            if ss_tot <= 0.0 {
                return Err(Error::DegenerateTarget {
                    column: names[j].clone(),
                    variance: 0.0,
                });
            }
            Ok(1.0 - ss_res / ss_tot)
        })
        .collect()
}

/// Test-set accuracy of one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub loss_mode: LossMode,
    pub n_test: usize,
    pub targets: Vec<TargetScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScore {
    pub name: String,
    /// Unit scale; may be negative.
    pub r2: f64,
    pub mse: f64,
}

impl EvaluationReport {
    pub fn evaluate(
        y_true: &Matrix,
        y_pred: &Matrix,
        names: &[String],
        seed: u64,
        loss_mode: LossMode,
    ) -> Result<Self> {
        let r2 = r_squared_named(y_true, y_pred, names)?;
        let mse = per_target_mse(y_true, y_pred)?;
        Ok(Self {
            seed,
            loss_mode,
            n_test: y_true.rows(),
            targets: names
                .iter()
                .zip(r2)
                .zip(mse)
                .map(|((name, r2), mse)| TargetScore {
                    name: name.clone(),
                    r2,
                    mse,
                })
                .collect(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.targets.iter().map(|t| t.name.clone()).collect()
    }

    pub fn r2_percent(&self) -> Vec<f64> {
        self.targets.iter().map(|t| 100.0 * t.r2).collect()
    }

    pub fn min_r2(&self) -> f64 {
        self.targets
            .iter()
            .map(|t| t.r2)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("report", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("report", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    /// Aligned plain-text table, R² in percent.
    pub fn render(&self) -> String {
        let mut out = format!(
            "loss mode {}  seed {}  test rows {}\n{:<8} {:>10} {:>12}\n",
            self.loss_mode, self.seed, self.n_test, "species", "R2 [%]", "MSE"
        );
        for t in &self.targets {
            let _ = writeln!(out, "{:<8} {:>10.2} {:>12.4e}", t.name, 100.0 * t.r2, t.mse);
        }
        out
    }
}

/// Mean and population standard deviation of R² (percent) across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub loss_mode: LossMode,
    pub runs: usize,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Smallest single-run R² (percent) per target.
    pub min: Vec<f64>,
}

pub fn summarize_runs(reports: &[EvaluationReport]) -> Result<RunSummary> {
    if reports.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 reports to summarize, got {}",
            reports.len()
        )));
    }
    let names = reports[0].names();
    if let Some(r) = reports.iter().find(|r| r.names() != names) {
        return Err(Error::Argument(format!(
            "report for seed {} has species {:?}, expected {:?}",
            r.seed,
            r.names(),
            names
        )));
    }
    let k = reports.len() as f64;
    let d = names.len();
    let mut mean = vec![0.0; d];
    let mut min = vec![f64::INFINITY; d];
    for r in reports {
        for (j, v) in r.r2_percent().into_iter().enumerate() {
            mean[j] += v;
            min[j] = min[j].min(v);
        }
    }
    for m in &mut mean {
        *m /= k;
    }
    let mut std = vec![0.0; d];
    for r in reports {
        for (j, v) in r.r2_percent().into_iter().enumerate() {
            std[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    for s in &mut std {
        *s = (*s / k).sqrt();
    }
    Ok(RunSummary {
        loss_mode: reports[0].loss_mode,
        runs: reports.len(),
        names,
        mean,
        std,
        min,
    })
}

impl RunSummary {
    /// `"mean ± std"`, or `"<0"` when any run scored below zero.
    pub fn cell(&self, j: usize) -> String {
        if self.min[j] < 0.0 {
            "<0".to_string()
        } else {
            format!("{:.2} ± {:.2}", self.mean[j], self.std[j])
        }
    }
}

/// Side-by-side table of two summaries with an optional variance header row.
pub fn render_comparison(rows: &[&RunSummary], variances: Option<&[f64]>) -> Result<String> {
    let names = comparison_names(rows)?;
    let width = 16;
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "species");
    for n in &names {
        let _ = write!(out, " {n:>width$}");
    }
    out.push('\n');
    if let Some(vars) = variances {
        let _ = write!(out, "{:<10}", "Var(Y)");
        for v in vars {
            let _ = write!(out, " {:>width$}", format!("{v:.2e}"));
        }
        out.push('\n');
    }
    for s in rows {
        let _ = write!(out, "{:<10}", s.loss_mode.to_string());
        for j in 0..names.len() {
            let _ = write!(out, " {:>width$}", s.cell(j));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Machine-readable comparison: one line per (mode, species), unmasked.
pub fn comparison_csv(rows: &[&RunSummary], variances: Option<&[f64]>) -> Result<String> {
    let names = comparison_names(rows)?;
    let mut out = String::from(
        "loss_mode,species,variance,runs,r2_mean_percent,r2_std_percent,r2_min_percent\n",
    );
    for s in rows {
        for (j, n) in names.iter().enumerate() {
            let var = variances
                .map(|v| format!("{:.16e}", v[j]))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e},{:.16e}",
                s.loss_mode, n, var, s.runs, s.mean[j], s.std[j], s.min[j]
            );
        }
    }
    Ok(out)
}

fn comparison_names(rows: &[&RunSummary]) -> Result<Vec<String>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Argument("nothing to compare".into()))?;
    if rows.iter().any(|s| s.names != first.names) {
        return Err(Error::Argument("summaries cover different species".into()));
    }
    Ok(first.names.clone())
}
