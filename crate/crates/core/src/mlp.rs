//! Fully connected generator network trained with MSE and Adam.
//!
//! Parameters live in one flat vector, layer by layer: the `out x in` weight
//! matrix (row-major) followed by the `out` biases. Gradients and Adam moments use
//! the same layout. Hidden layers apply the chosen activation; the output layer
//! is affine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::LabeledPairSet;
use crate::math;
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => math::tanh(x),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
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
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(Error::config(format!("unknown activation '{s}' (expected relu or tanh)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    activation: Activation,
    seed: u64,
    layers: Vec<LayerSlot>,
    params: Vec<f64>,
}

fn layout(layer_dims: &[usize]) -> Result<(Vec<LayerSlot>, usize)> {
    if layer_dims.len() < 2 {
        return Err(Error::config("layer list needs at least input and output dims"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::config("layer dims must be >= 1"));
    }
    if layer_dims[0] != layer_dims[layer_dims.len() - 1] {
        return Err(Error::config(format!(
            "generator must map R^d to R^d, got input {} and output {}",
            layer_dims[0],
            layer_dims[layer_dims.len() - 1]
        )));
    }
    let mut offset = 0;
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let slot = LayerSlot { fan_in: w[0], fan_out: w[1], weights: offset, bias: offset + w[0] * w[1] };
            offset = slot.bias + w[1];
            slot
        })
        .collect();
    Ok((layers, offset))
}

/// `[d, hidden..., d]`
pub fn layer_dims(d: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(d);
    dims.extend_from_slice(hidden);
    dims.push(d);
    dims
}

impl MlpModel {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let (layers, count) = layout(layer_dims)?;
        let mut params = vec![0.0; count];
        let mut rng = rng::stream(seed);
        for l in &layers {
            let limit = math::sqrt(6.0 / (l.fan_in + l.fan_out) as f64);
            for w in &mut params[l.weights..l.bias] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(Self { layer_dims: layer_dims.to_vec(), activation, seed, layers, params })
    }

    /// Rebuild a model from a flat parameter vector in the layout described above.
    pub fn from_parts(layer_dims: &[usize], activation: Activation, seed: u64, params: Vec<f64>) -> Result<Self> {
        let (layers, count) = layout(layer_dims)?;
        if params.len() != count {
            return Err(Error::shape(format!("expected {count} parameters, got {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("parameters must be finite"));
        }
        Ok(Self { layer_dims: layer_dims.to_vec(), activation, seed, layers, params })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.dims() {
            return Err(Error::shape(format!("model expects {} inputs, got {}", self.dims(), inputs.cols())));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_input(inputs)?;
        let mut ws = Workspace::default();
        self.forward_into(inputs.as_slice(), inputs.rows(), &mut ws);
        let out = ws.acts.pop().unwrap_or_default();
        Matrix::from_vec(inputs.rows(), self.dims(), out)
    }

    /// Fills `ws.pre[l]` and `ws.acts[l]` for every layer.
    fn forward_into(&self, inputs: &[f64], batch: usize, ws: &mut Workspace) {
        ws.resize(&self.layers, batch);
        let last = self.layers.len() - 1;
        for (l, slot) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { inputs } else { &done[l - 1] };
            let pre = &mut ws.pre[l];
            gemm_abt(batch, slot.fan_in, slot.fan_out, input, &self.params[slot.weights..slot.bias], pre);
            let bias = &self.params[slot.bias..slot.bias + slot.fan_out];
            for row in pre.chunks_exact_mut(slot.fan_out) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            let act = &mut rest[0];
            if l == last {
                act.copy_from_slice(pre);
            } else {
                for (a, z) in act.iter_mut().zip(pre.iter()) {
                    *a = self.activation.apply(*z);
                }
            }
        }
    }

    /// Mean squared error over batch and output dims, and its gradient.
    pub fn mse_grad(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Vec<f64>)> {
        self.check_input(inputs)?;
        if targets.rows() != inputs.rows() || targets.cols() != self.dims() {
            return Err(Error::shape("targets do not align with inputs"));
        }
        let mut ws = Workspace::default();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.loss_and_grad(inputs.as_slice(), targets.as_slice(), inputs.rows(), &mut ws, &mut grad);
        Ok((loss, grad))
    }

    fn loss_and_grad(&self, inputs: &[f64], targets: &[f64], batch: usize, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        self.forward_into(inputs, batch, ws);
        let out_dim = self.dims();
        let scale = 1.0 / (batch * out_dim) as f64;
        let last = self.layers.len() - 1;

        // delta holds dL/dz for the current layer
        let mut delta = core::mem::take(&mut ws.delta);
        let mut next = core::mem::take(&mut ws.delta_next);
        delta.clear();
        let mut loss = 0.0;
        for (y, t) in ws.acts[last].iter().zip(targets) {
            let e = y - t;
            loss += e * e;
            delta.push(2.0 * e * scale);
        }
        loss *= scale;

        for l in (0..self.layers.len()).rev() {
            let slot = self.layers[l];
            let input: &[f64] = if l == 0 { inputs } else { &ws.acts[l - 1] };
            gemm_atb(slot.fan_out, batch, slot.fan_in, &delta, input, &mut grad[slot.weights..slot.bias]);
            let db = &mut grad[slot.bias..slot.bias + slot.fan_out];
            db.fill(0.0);
            for row in delta.chunks_exact(slot.fan_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                next.resize(batch * slot.fan_in, 0.0);
                gemm_ab(batch, slot.fan_out, slot.fan_in, &delta, &self.params[slot.weights..slot.bias], &mut next);
                for ((d, z), a) in next.iter_mut().zip(&ws.pre[l - 1]).zip(&ws.acts[l - 1]) {
                    *d *= self.activation.derivative(*z, *a);
                }
                core::mem::swap(&mut delta, &mut next);
            }
        }
        ws.delta = delta;
        ws.delta_next = next;
        loss
    }

    /// Push `m` standard-normal draws from `seed` through the network.
    pub fn sample(&self, m: usize, seed: u64) -> Matrix {
        let d = self.dims();
        let noise = rng::standard_normal_matrix(m, d, seed);
        let mut out = Vec::with_capacity(m * d);
        let mut ws = Workspace::default();
        const CHUNK: usize = 8192;
        for chunk in noise.as_slice().chunks(CHUNK * d) {
            self.forward_into(chunk, chunk.len() / d, &mut ws);
            out.extend_from_slice(&ws.acts[self.layers.len() - 1]);
        }
        Matrix::from_vec(m, d, out).expect("sample buffer matches m x d")
    }
}

#[derive(Debug, Default)]
struct Workspace {
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    fn resize(&mut self, layers: &[LayerSlot], batch: usize) {
        self.pre.resize_with(layers.len(), Vec::new);
        self.acts.resize_with(layers.len(), Vec::new);
        for (l, slot) in layers.iter().enumerate() {
            self.pre[l].resize(batch * slot.fan_out, 0.0);
            self.acts[l].resize(batch * slot.fan_out, 0.0);
        }
    }
}

/// `c (m x n) = a (m x k) * b^T` where `b` is `n x k` row-major.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// `c (m x n) = a^T * b` where `a` is `k x m` and `b` is `k x n`, both row-major.
fn gemm_atb(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), n as isize, 1,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// `c (m x n) = a (m x k) * b (k x n)`, all row-major.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Rows per gradient step; 0 means full batch.
    pub minibatch: usize,
    /// Shuffles minibatches each epoch.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 0.005,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            minibatch: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config("adam_eps must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured before that epoch's updates.
    pub loss_history: Vec<f64>,
    /// Zero when built without `std`.
    pub wall_time_s: f64,
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, step: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn from_config(num_params: usize, cfg: &TrainConfig) -> Self {
        Self::new(num_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step = self.step.saturating_add(1);
        let c1 = 1.0 - powi(self.beta1, self.step);
        let c2 = 1.0 - powi(self.beta2, self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (math::sqrt(v_hat) + self.eps);
        }
    }
}

fn powi(base: f64, exp: i32) -> f64 {
    (0..exp).fold(1.0, |acc, _| acc * base)
}

/// Fit `model` to `pairs` (inputs -> outputs) for `cfg.epochs` passes.
pub fn train(model: &mut MlpModel, pairs: &LabeledPairSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.dims() != model.dims() {
        return Err(Error::shape(format!("pairs have {} dims, model has {}", pairs.dims(), model.dims())));
    }
    if pairs.is_empty() {
        return Err(Error::config("no training pairs"));
    }
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();

    let rows = pairs.len();
    let batch = if cfg.minibatch == 0 { rows } else { cfg.minibatch.min(rows) };
    let mut adam = Adam::from_config(model.num_params(), cfg);
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; model.num_params()];
    let mut order: Vec<usize> = (0..rows).collect();
    let mut shuffle_rng = rng::stream(cfg.seed);
    let (mut xb, mut yb) = (Vec::new(), Vec::new());
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        if batch == rows {
            epoch_loss = model.loss_and_grad(pairs.inputs.as_slice(), pairs.outputs.as_slice(), rows, &mut ws, &mut grad);
            adam.update(&mut model.params, &grad);
        } else {
            order.shuffle(&mut shuffle_rng);
            for idx in order.chunks(batch) {
                xb.clear();
                yb.clear();
                for &i in idx {
                    xb.extend_from_slice(pairs.inputs.row(i));
                    yb.extend_from_slice(pairs.outputs.row(i));
                }
                let l = model.loss_and_grad(&xb, &yb, idx.len(), &mut ws, &mut grad);
                epoch_loss += l * idx.len() as f64 / rows as f64;
                adam.update(&mut model.params, &grad);
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Training { epoch });
        }
        loss_history.push(epoch_loss);
    }

    #[cfg(feature = "std")]
    let wall_time_s = started.elapsed().as_secs_f64();
    #[cfg(not(feature = "std"))]
    let wall_time_s = 0.0;
    Ok(TrainReport { loss_history, wall_time_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        let toy = MlpModel::init(&[2, 100, 100, 100, 100, 2], Activation::Relu, 0).unwrap();
        // (2*100 + 100) + 3 * (100*100 + 100) + (100*2 + 2)
        assert_eq!(toy.num_params(), 300 + 30_300 + 202);
        assert_eq!(toy.num_params(), 30_802);
        let power = MlpModel::init(&[6, 256, 6], Activation::Relu, 0).unwrap();
        assert_eq!(power.num_params(), 3_334);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpModel::init(&[3, 7, 3], Activation::Tanh, 5).unwrap();
        assert_eq!(a, MlpModel::init(&[3, 7, 3], Activation::Tanh, 5).unwrap());
        assert_ne!(a, MlpModel::init(&[3, 7, 3], Activation::Tanh, 6).unwrap());
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(a.params()[..21].iter().all(|w| w.abs() <= limit));
        assert!(a.params()[21..28].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(MlpModel::init(&[], Activation::Relu, 0).is_err());
        assert!(MlpModel::init(&[2], Activation::Relu, 0).is_err());
        assert!(MlpModel::init(&[2, 0, 2], Activation::Relu, 0).is_err());
        assert!(MlpModel::init(&[2, 4, 3], Activation::Relu, 0).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = MlpModel::init(&[2, 5, 2], Activation::Relu, 1).unwrap();
        m.params_mut().fill(0.0);
        let out = m.forward(&Matrix::from_rows(&[[1.0, -3.0], [2.0, 7.0]]).unwrap()).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_affine_layer() {
        // identity weights, bias (0.5, -1)
        let m = MlpModel::from_parts(&[2, 2], Activation::Relu, 0, vec![1.0, 0.0, 0.0, 1.0, 0.5, -1.0]).unwrap();
        let out = m.forward(&Matrix::from_rows(&[[3.0, -4.0]]).unwrap()).unwrap();
        assert_eq!(out.row(0), &[3.5, -5.0]);
    }

    #[test]
    fn hand_traced_scalar_net() {
        let m = MlpModel::from_parts(&[1, 1, 1], Activation::Relu, 0, vec![2.0, 0.0, 3.0, 1.0]).unwrap();
        let out = m.forward(&Matrix::from_rows(&[[-1.0], [1.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 7.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = MlpModel::init(&[2, 3, 2], Activation::Relu, 0).unwrap();
        assert!(m.forward(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let m = MlpModel::init(&[2, 6, 2], Activation::Tanh, 3).unwrap();
        let x = rng::standard_normal_matrix(10, 2, 4);
        let y = m.forward(&x).unwrap();
        let (loss, grad) = m.mse_grad(&x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn doubling_errors_quadruples_loss() {
        let m = MlpModel::init(&[2, 6, 2], Activation::Relu, 3).unwrap();
        let x = rng::standard_normal_matrix(10, 2, 4);
        let y = m.forward(&x).unwrap();
        let noise = rng::standard_normal_matrix(10, 2, 5);
        let t1: Vec<f64> = y.as_slice().iter().zip(noise.as_slice()).map(|(a, e)| a + e).collect();
        let t2: Vec<f64> = y.as_slice().iter().zip(noise.as_slice()).map(|(a, e)| a + 2.0 * e).collect();
        let (l1, _) = m.mse_grad(&x, &Matrix::from_vec(10, 2, t1).unwrap()).unwrap();
        let (l2, _) = m.mse_grad(&x, &Matrix::from_vec(10, 2, t2).unwrap()).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn adam_with_zero_rate_is_inert() {
        let mut params = vec![0.3, -1.2, 4.0];
        let before = params.clone();
        let mut adam = Adam::new(3, 0.0, 0.9, 0.999, 1e-8);
        for _ in 0..5 {
            adam.update(&mut params, &[1.0, -2.0, 0.5]);
        }
        assert_eq!(params, before);
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut m = MlpModel::init(&[2, 4, 2], Activation::Relu, 0).unwrap();
        let before = m.clone();
        let x = rng::standard_normal_matrix(8, 2, 1);
        let pairs = LabeledPairSet::new(x.clone(), x, None).unwrap();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let report = train(&mut m, &pairs, &cfg).unwrap();
        assert!(report.loss_history.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn sample_is_seeded() {
        let m = MlpModel::init(&[2, 8, 2], Activation::Relu, 0).unwrap();
        assert_eq!(m.sample(100, 3), m.sample(100, 3));
        assert_ne!(m.sample(100, 3), m.sample(100, 4));
        // chunking must not change results
        let big = m.sample(10_000, 1);
        let direct = m.forward(&rng::standard_normal_matrix(10_000, 2, 1)).unwrap();
        assert_eq!(big, direct);
    }

    #[test]
    fn rejects_bad_train_config() {
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { adam_beta1: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
