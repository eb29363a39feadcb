//! Minibatch SGD with per-epoch validation diagnostics.
//!
//! After every epoch the trainer records, for each target `j`, the validation
//! loss `L_j` and the standard deviation over all parameters of
//! `d(w_j L_j)/dtheta` evaluated on the whole validation set. The weight
//! `w_j` is included, so the diagnostic describes the update that target
//! actually contributes.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::data::PreparedData;
use crate::error::{Error, Result};
use crate::loss::{
    loss_output_gradient, loss_output_gradient_scaled, per_target_mse, total_loss, LossSpec,
};
use crate::network::{GradientSet, Network};
use crate::rng::{Purpose, SeedStream};

/// Training aborts once the minibatch loss exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Rows per chunk when evaluating over a whole split.
pub const EVAL_CHUNK: usize = 1024;

/// Update rule applied to each minibatch gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    /// `theta <- theta - lr * g`.
    Sgd,
    /// Bias-corrected Adam with the given moment decay rates and epsilon.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl UpdateRule {
    pub const ADAM: UpdateRule = UpdateRule::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-7,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub update_rule: UpdateRule,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_spec: LossSpec,
    pub diagnostics_enabled: bool,
}

impl TrainConfig {
    /// Learning rate 0.001, batch 1024, 50 epochs, diagnostics on.
    pub fn new(loss_spec: LossSpec, seed: u64) -> Self {
        Self {
            update_rule: UpdateRule::ADAM,
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 50,
            seed,
            loss_spec,
            diagnostics_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `L_j` on the validation set.
    pub val_loss: Vec<f64>,
    /// `sum_j w_j L_j` on the validation set.
    pub total_val_loss: f64,
    /// Per-target gradient standard deviation, when diagnostics are enabled.
    pub grad_std: Option<Vec<f64>>,
    /// Sample-weighted mean of the minibatch losses seen during the epoch.
    pub total_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub target_names: Vec<String>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// CSV with one row per (epoch, species):
    /// `epoch,species,val_loss,grad_std,total_train_loss`. Epochs start at 1;
    /// `grad_std` is empty when diagnostics were disabled.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,species,val_loss,grad_std,total_train_loss\n");
        for rec in &self.epochs {
            for (j, name) in self.target_names.iter().enumerate() {
                let grad = rec
                    .grad_std
                    .as_ref()
                    .map(|g| format!("{:.16e}", g[j]))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{:.16e},{},{:.16e}",
                    rec.epoch, name, rec.val_loss[j], grad, rec.total_train_loss
                );
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// `theta <- theta - lr * grad` for every parameter.
pub fn sgd_step(net: &mut Network, grads: &GradientSet, lr: f64) -> Result<()> {
    if !grads.matches(net) {
        return Err(Error::State(
            "gradient layout does not match network".into(),
        ));
    }
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        for (w, dw) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice())
        {
            *w -= lr * dw;
        }
        for (b, db) in layer.biases.iter_mut().zip(&g.biases) {
            *b -= lr * db;
        }
    }
    Ok(())
}

/// First and second moment estimates for [`UpdateRule::Adam`].
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let n = net.param_count();
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One Adam update; parameters are visited in [`Network::params`] order.
pub fn adam_step(
    net: &mut Network,
    grads: &GradientSet,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if !grads.matches(net) || state.m.len() != net.param_count() {
        return Err(Error::State(
            "gradient or moment layout does not match network".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let mut k = 0;
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
        let params = layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice())
            .chain(layer.biases.iter_mut().zip(&g.biases));
        for (p, &gi) in params {
            let m = &mut state.m[k];
            let v = &mut state.v[k];
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        }
    }
    Ok(())
}

/// Per-target validation loss `L_j` over the whole dataset.
pub fn evaluate_per_target(net: &Network, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    let n = data.len();
    let mut sums = vec![0.0; data.target_dim()];
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let x = data.inputs().select_rows(&idx);
        let t = data.targets().select_rows(&idx);
        let y = net.predict(&x)?;
        let chunk = per_target_mse(&t, &y)?;
        for (s, l) in sums.iter_mut().zip(chunk) {
            *s += l * idx.len() as f64;
        }
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Per-target gradients `d(w_j L_j)/dtheta` over the whole set, accumulated
/// chunk by chunk with the full-set normalization.
pub fn per_target_gradients(
    net: &Network,
    data: &Dataset,
    spec: &LossSpec,
) -> Result<Vec<GradientSet>> {
    if data.is_empty() {
        return Err(Error::Argument("validation set is empty".into()));
    }
    let n = data.len();
    let mut acc: Vec<GradientSet> = (0..net.output_dim())
        .map(|_| GradientSet::zeros_like(net))
        .collect();
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let x = data.inputs().select_rows(&idx);
        let t = data.targets().select_rows(&idx);
        let (y, cache) = net.forward(&x)?;
        let g = loss_output_gradient_scaled(&t, &y, spec, n)?;
        for (a, part) in acc.iter_mut().zip(net.backward_each_target(&cache, &g)?) {
            a.add_assign(&part)?;
        }
    }
    Ok(acc)
}

/// Population standard deviation of each target's gradient over all parameters.
pub fn gradient_std_per_species(
    net: &Network,
    validation: &Dataset,
    spec: &LossSpec,
) -> Result<Vec<f64>> {
    Ok(per_target_gradients(net, validation, spec)?
        .iter()
        .map(GradientSet::std)
        .collect())
}

/// Runs `epochs` passes of minibatch gradient descent over `data.train`,
/// stepping with `config.update_rule`.
///
/// Each epoch reshuffles the training rows with the run's shuffle stream and
/// takes consecutive chunks of `batch_size`; the final chunk may be short and
/// is normalized by its own length.
pub fn train(
    mut net: Network,
    data: &PreparedData,
    config: &TrainConfig,
) -> Result<(Network, TrainingHistory)> {
    config.validate()?;
    let train_set = &data.train;
    let d = train_set.target_dim();
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if data.validation.is_empty() {
        return Err(Error::Argument("validation set is empty".into()));
    }
    if config.loss_spec.targets() != d {
        return Err(Error::Shape(format!(
            "loss spec has {} weights for {d} targets",
            config.loss_spec.targets()
        )));
    }
    if net.input_dim() != train_set.input_dim() || net.output_dim() != d {
        return Err(Error::Shape(format!(
            "network maps {} -> {}, data has {} inputs and {d} targets",
            net.input_dim(),
            net.output_dim(),
            train_set.input_dim()
        )));
    }

    let mut shuffle = SeedStream::for_purpose(config.seed, Purpose::Shuffle);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut adam = AdamState::new(&net);

    for epoch in 1..=config.epochs {
        shuffle.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = train_set.inputs().select_rows(idx);
            let t = train_set.targets().select_rows(idx);
            let (y, cache) = net.forward(&x)?;
            let loss = total_loss(&per_target_mse(&t, &y)?, &config.loss_spec)?;
            if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch + 1,
                    loss,
                });
            }
            loss_sum += loss * idx.len() as f64;
            let g = loss_output_gradient(&t, &y, &config.loss_spec)?;
            let grads = net.backward(&cache, &g)?;
            match config.update_rule {
                UpdateRule::Sgd => sgd_step(&mut net, &grads, config.learning_rate)?,
                UpdateRule::Adam { beta1, beta2, eps } => adam_step(
                    &mut net,
                    &grads,
                    &mut adam,
                    config.learning_rate,
                    beta1,
                    beta2,
                    eps,
                )?,
            }
        }

        let val_loss = evaluate_per_target(&net, &data.validation)?;
        let total_val_loss = total_loss(&val_loss, &config.loss_spec)?;
        if !total_val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: total_val_loss,
            });
        }
        let grad_std = if config.diagnostics_enabled {
            Some(gradient_std_per_species(
                &net,
                &data.validation,
                &config.loss_spec,
            )?)
        } else {
            None
        };
        epochs.push(EpochRecord {
            epoch,
            val_loss,
            total_val_loss,
            grad_std,
            total_train_loss: loss_sum / train_set.len() as f64,
        });
    }

    Ok((
        net,
        TrainingHistory {
            target_names: train_set.target_names().to_vec(),
            epochs,
        },
    ))
}
