//! Helpers shared by the integration tests: random small problems and a
//! central finite-difference oracle that only calls the forward pass.

#![allow(dead_code)]

use flamelut::loss::{per_target_mse, total_loss};
use flamelut::network::Network;
use flamelut::rng::SeedStream;
use flamelut::{LossSpec, Matrix};

pub const FD_STEP: f64 = 1e-6;

/// A network with at most 200 parameters, a batch of 1 to 8 rows and
/// simplex-valued targets.
pub struct GradientCase {
    pub net: Network,
    pub x: Matrix,
    pub t: Matrix,
}

pub fn random_case(seed: u64) -> GradientCase {
    let mut s = SeedStream::new(seed);
    loop {
        let input = 1 + s.index_below(4);
        let output = 2 + s.index_below(4);
        let hidden_layers = 1 + s.index_below(2);
        let mut sizes = vec![input];
        sizes.extend((0..hidden_layers).map(|_| 2 + s.index_below(6)));
        sizes.push(output);
        let net = Network::init_glorot(&sizes, s.next_u64()).unwrap();
        if net.param_count() > 200 {
            continue;
        }
        let batch = 1 + s.index_below(8);
        let x = Matrix::from_vec(
            batch,
            input,
            (0..batch * input).map(|_| s.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let mut t = Matrix::zeros(batch, output);
        for r in 0..batch {
            let raw: Vec<f64> = (0..output).map(|_| s.uniform(0.01, 1.0)).collect();
            let sum: f64 = raw.iter().sum();
            for (c, v) in raw.iter().enumerate() {
                t.set(r, c, v / sum);
            }
        }
        return GradientCase { net, x, t };
    }
}

/// Weights spanning four decades, as variance weighting produces.
pub fn random_weights(seed: u64, d: usize) -> LossSpec {
    let mut s = SeedStream::new(seed ^ 0xA5A5);
    LossSpec::weighted((0..d).map(|_| 10f64.powf(s.uniform(0.0, 4.0))).collect()).unwrap()
}

pub fn per_target_losses(net: &Network, x: &Matrix, t: &Matrix) -> Vec<f64> {
    per_target_mse(t, &net.predict(x).unwrap()).unwrap()
}

pub fn full_loss(net: &Network, x: &Matrix, t: &Matrix, spec: &LossSpec) -> f64 {
    total_loss(&per_target_losses(net, x, t), spec).unwrap()
}

/// Central differences of `f` with respect to every parameter, in
/// [`Network::params`] order.
pub fn numeric_gradient(net: &Network, f: impl Fn(&Network) -> f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    let mut params = base.clone();
    (0..base.len())
        .map(|i| {
            params[i] = base[i] + FD_STEP;
            probe.set_params(&params).unwrap();
            let up = f(&probe);
            params[i] = base[i] - FD_STEP;
            probe.set_params(&params).unwrap();
            let down = f(&probe);
            params[i] = base[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Worst errors seen by the gradient oracle over a set of cases.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleWorst {
    pub full: f64,
    pub per_target: f64,
    pub decomposition: f64,
    pub cases: usize,
}

/// Backprop versus finite differences for the full loss and every
/// single-target loss, in both loss modes, plus the per-target sum against
/// the full gradient.
pub fn run_gradient_oracle(seeds: impl IntoIterator<Item = u64>) -> OracleWorst {
    let mut worst = OracleWorst::default();
    for seed in seeds {
        let case = random_case(seed);
        let d = case.net.output_dim();
        for spec in [LossSpec::standard(d), random_weights(seed, d)] {
            let (y, cache) = case.net.forward(&case.x).unwrap();
            let g_out = flamelut::loss::loss_output_gradient(&case.t, &y, &spec).unwrap();
            let full = case.net.backward(&cache, &g_out).unwrap().flatten();
            let numeric = numeric_gradient(&case.net, |n| full_loss(n, &case.x, &case.t, &spec));
            worst.full = worst.full.max(relative_error(&full, &numeric));

            let parts = case.net.backward_each_target(&cache, &g_out).unwrap();
            let mut summed = vec![0.0; full.len()];
            for (j, part) in parts.iter().enumerate() {
                let analytic = part.flatten();
                let w = spec.weights()[j];
                let numeric =
                    numeric_gradient(&case.net, |n| w * per_target_losses(n, &case.x, &case.t)[j]);
                worst.per_target = worst.per_target.max(relative_error(&analytic, &numeric));
                for (s, a) in summed.iter_mut().zip(&analytic) {
                    *s += a;
                }
            }
            worst.decomposition = worst.decomposition.max(relative_error(&summed, &full));
        }
        worst.cases += 1;
    }
    worst
}
