//! Fully-connected network with tanh hidden layers and a softmax head.
//!
//! Layer weights are stored `(fan_in, fan_out)` so a batch `x` of shape
//! `(batch, fan_in)` maps to `x * W + b` of shape `(batch, fan_out)`.
//!
//! The softmax head is differentiated explicitly: for an output row `y` and an
//! upstream gradient row `g = dL/dy`, the logit gradient is `J^T g` with
//! `J[i][k] = y_i (delta_ik - y_k)`, which reduces to
//! `y_k (g_k - sum_i g_i y_i)`. Because the loss is never fused into the head,
//! a single-target upstream gradient (only column `j` nonzero) backpropagates
//! to exactly `dL_j/dtheta`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn, Matrix};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Softmax,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "softmax" => Ok(Activation::Softmax),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::format(
                "network",
                format!("unknown activation `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.cols() != biases.len() {
            return Err(Error::Shape(format!(
                "layer weights {}x{} with {} biases",
                weights.rows(),
                weights.cols(),
                biases.len()
            )));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Intermediate state of one forward pass, consumed by the backward passes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre_activations: Vec<Matrix>,
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    pub fn output(&self) -> &Matrix {
        self.activations
            .last()
            .expect("cache has at least one layer")
    }

    pub fn layer_count(&self) -> usize {
        self.activations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// `dL/dtheta` for every layer, in the same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.fan_in(), l.fan_out()),
                    biases: vec![0.0; l.fan_out()],
                })
                .collect(),
        }
    }

    /// True if every tensor has the shape of the matching network layer.
    pub fn matches(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.shape() == l.weights.shape() && g.biases.len() == l.biases.len()
            })
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if self.layers.len() != other.layers.len()
            || self.layers.iter().zip(&other.layers).any(|(a, b)| {
                a.weights.shape() != b.weights.shape() || a.biases.len() != b.biases.len()
            })
        {
            return Err(Error::State("gradient sets have different layouts".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
        Ok(())
    }

    /// All entries, layer by layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.biases).copied())
    }

    /// Population standard deviation over all entries.
    pub fn std(&self) -> f64 {
        let n = self.iter().count() as f64;
        let mean = self.iter().sum::<f64>() / n;
        let var = self.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
        var.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

impl Network {
    /// Validates layer chaining and the single trailing softmax head.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Config(format!(
                    "layer {l} has fan_out {} but layer {} has fan_in {}",
                    pair[0].fan_out(),
                    l + 1,
                    pair[1].fan_in()
                )));
            }
        }
        let softmax_count = layers
            .iter()
            .filter(|l| l.activation == Activation::Softmax)
            .count();
        if softmax_count != 1 || layers.last().unwrap().activation != Activation::Softmax {
            return Err(Error::Config(
                "exactly one softmax layer is required and it must be last".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases, tanh hidden layers and softmax head.
    ///
    /// Weights are drawn layer by layer in row-major `(fan_in, fan_out)` order
    /// from `U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`.
    pub fn init_glorot(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let mut rng = SeedStream::new(seed);
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform(-limit, limit))
                    .collect();
                let activation = if l == last {
                    Activation::Softmax
                } else {
                    Activation::Tanh
                };
                Layer::new(
                    Matrix::from_vec(fan_in, fan_out, data)?,
                    vec![0.0; fan_out],
                    activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    /// `[input_dim, hidden..., output_dim]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::fan_out))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All parameters in [`GradientSet::flatten`] order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, network has {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            l.weights
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = activations.last().unwrap_or(x);
            let z = affine(layer, prev)?;
            let a = activate(layer.activation, &z);
            pre_activations.push(z);
            activations.push(a);
        }
        let y = activations.last().unwrap().clone();
        Ok((
            y,
            ForwardCache {
                input: x.clone(),
                pre_activations,
                activations,
            },
        ))
    }

    /// Forward pass that keeps no intermediate state.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut current = x.clone();
        for layer in &self.layers {
            let z = affine(layer, &current)?;
            current = activate(layer.activation, &z);
        }
        Ok(current)
    }

    /// `dL/dtheta` given `dL/dy` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> Result<GradientSet> {
        self.check_cache(cache)?;
        if d_output.shape() != cache.output().shape() {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, forward output was {}x{}",
                d_output.rows(),
                d_output.cols(),
                cache.output().rows(),
                cache.output().cols()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = d_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let delta = activation_backward(
                layer.activation,
                &cache.pre_activations[l],
                &cache.activations[l],
                &upstream,
            );
            let prev = if l == 0 {
                &cache.input
            } else {
                &cache.activations[l - 1]
            };
            let weights = matmul_tn(prev, &delta)?;
            let mut biases = vec![0.0; layer.fan_out()];
            for r in 0..delta.rows() {
                for (b, d) in biases.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            if l > 0 {
                upstream = matmul_nt(&delta, &layer.weights)?;
            }
            grads.push(LayerGradient { weights, biases });
        }
        grads.reverse();
        Ok(GradientSet { layers: grads })
    }

    /// `dL_j/dtheta` for one target.
    ///
    /// `d_output` must be the gradient of the single-target loss `L_j` with
    /// respect to the full output, so only column `target` may be nonzero;
    /// the other targets are still reached through the softmax coupling.
    pub fn backward_per_target(
        &self,
        cache: &ForwardCache,
        target: usize,
        d_output: &Matrix,
    ) -> Result<GradientSet> {
        if target >= self.output_dim() {
            return Err(Error::Argument(format!(
                "target index {target} out of range for {} outputs",
                self.output_dim()
            )));
        }
        for r in 0..d_output.rows() {
            for (c, &v) in d_output.row(r).iter().enumerate() {
                if c != target && v != 0.0 {
                    return Err(Error::Argument(format!(
                        "gradient of L_{target} has nonzero entry in column {c}"
                    )));
                }
            }
        }
        self.backward(cache, d_output)
    }

    /// Splits `dL/dy` by column and backpropagates each target separately.
    pub fn backward_each_target(
        &self,
        cache: &ForwardCache,
        d_output: &Matrix,
    ) -> Result<Vec<GradientSet>> {
        (0..self.output_dim())
            .map(|j| {
                let masked = column_only(d_output, j);
                self.backward_per_target(cache, j, &masked)
            })
            .collect()
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let consistent = cache.layer_count() == self.layers.len()
            && cache.input.cols() == self.input_dim()
            && self
                .layers
                .iter()
                .zip(&cache.activations)
                .all(|(l, a)| a.cols() == l.fan_out() && a.rows() == cache.input.rows());
        if !consistent {
            return Err(Error::State(
                "forward cache does not belong to this network".into(),
            ));
        }
        Ok(())
    }

    /// Writes the versioned text format described in `docs/FORMATS.md`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("flamelut-network 1\n");
        s.push_str(&format!("layers {}\n", self.layers.len()));
        for l in &self.layers {
            s.push_str(&format!(
                "layer {} {} {}\n",
                l.fan_in(),
                l.fan_out(),
                l.activation
            ));
            for r in 0..l.weights.rows() {
                push_values(&mut s, l.weights.row(r));
            }
            push_values(&mut s, &l.biases);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::format("network", m);
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))
        };
        let (_, header) = next("header")?;
        if header.trim() != "flamelut-network 1" {
            return Err(bad(format!("unsupported header `{header}`")));
        }
        let (n, line) = next("layer count")?;
        let count: usize = line
            .strip_prefix("layers ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("line {}: expected `layers <n>`", n + 1)))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("layer header")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "layer" {
                return Err(bad(format!(
                    "line {}: expected `layer <in> <out> <act>`",
                    n + 1
                )));
            }
            let fan_in: usize = parts[1]
                .parse()
                .map_err(|_| bad(format!("line {}: bad fan_in", n + 1)))?;
            let fan_out: usize = parts[2]
                .parse()
                .map_err(|_| bad(format!("line {}: bad fan_out", n + 1)))?;
            let activation: Activation = parts[3].parse()?;
            let mut data = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in {
                let (n, line) = next("weight row")?;
                data.extend(parse_values(line, fan_out, n + 1)?);
            }
            let (n, line) = next("bias row")?;
            let biases = parse_values(line, fan_out, n + 1)?;
            layers.push(Layer::new(
                Matrix::from_vec(fan_in, fan_out, data)?,
                biases,
                activation,
            )?);
        }
        Network::new(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text)
    }
}

fn push_values(s: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(' ');
        }
        first = false;
        // `{:?}` prints the shortest representation that parses back to the same bits.
        s.push_str(&format!("{v:?}"));
    }
    s.push('\n');
}

fn parse_values(line: &str, expected: usize, line_no: usize) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::format("network", format!("line {line_no}: bad number `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::format(
            "network",
            format!(
                "line {line_no}: expected {expected} values, found {}",
                values.len()
            ),
        ));
    }
    Ok(values)
}

fn affine(layer: &Layer, x: &Matrix) -> Result<Matrix> {
    let mut z = matmul(x, &layer.weights)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
            *v += b;
        }
    }
    Ok(z)
}

fn activate(activation: Activation, z: &Matrix) -> Matrix {
    match activation {
        Activation::Tanh => z.map(f64::tanh),
        Activation::Linear => z.clone(),
        Activation::Softmax => {
            let mut out = z.clone();
            for r in 0..out.rows() {
                softmax_in_place(out.row_mut(r));
            }
            out
        }
    }
}

/// Gradient with respect to a layer's pre-activation given the gradient with
/// respect to its activation.
fn activation_backward(
    activation: Activation,
    pre: &Matrix,
    post: &Matrix,
    upstream: &Matrix,
) -> Matrix {
    match activation {
        Activation::Linear => upstream.clone(),
        Activation::Tanh => {
            let mut delta = upstream.clone();
            for (d, a) in delta.as_mut_slice().iter_mut().zip(post.as_slice()) {
                *d *= 1.0 - a * a;
            }
            delta
        }
        Activation::Softmax => {
            debug_assert_eq!(pre.shape(), post.shape());
            let mut delta = Matrix::zeros(post.rows(), post.cols());
            for r in 0..post.rows() {
                softmax_jacobian_transpose_product(post.row(r), upstream.row(r), delta.row_mut(r));
            }
            delta
        }
    }
}

/// `out = J^T g` for the softmax Jacobian `J[i][k] = y_i (delta_ik - y_k)`.
pub fn softmax_jacobian_transpose_product(y: &[f64], g: &[f64], out: &mut [f64]) {
    let weighted: f64 = y.iter().zip(g).map(|(yi, gi)| yi * gi).sum();
    for ((o, &yk), &gk) in out.iter_mut().zip(y).zip(g) {
        *o = yk * (gk - weighted);
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

fn column_only(m: &Matrix, col: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.set(r, col, m.get(r, col));
    }
    out
}
