//! Dense feedforward networks with full activation capture.
//!
//! The forward pass that produces activation traces runs on the `f32`
//! tensor kernels. Gradients come from a separate `f64` path over the same
//! parameters so that attacks and gradient checks are not limited by
//! single-precision cancellation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::hash::{Digest, Fnv1a64};
use crate::numerics::{self, NumericsError, Tensor};
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Dimension(#[from] NumericsError),
    #[error("input has {actual} values but the model expects {expected}")]
    InputSize { expected: usize, actual: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u32, num_classes: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    fn apply(self, t: &Tensor) -> Tensor {
        match self {
            Activation::Relu => numerics::relu(t),
            Activation::Sigmoid => numerics::sigmoid(t),
            Activation::Identity => t.clone(),
        }
    }

    fn apply_f64(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative_f64(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "identity" => Ok(Self::Identity),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    kind: LayerKind,
    activation: Activation,
    weights: Tensor,
    bias: Tensor,
}

impl LayerSpec {
    /// `weights` is `input_size × output_size`, `bias` is `1 × output_size`.
    pub fn dense(activation: Activation, weights: Tensor, bias: Tensor) -> Result<Self, EngineError> {
        let [rows, cols] = weights.shape() else {
            return Err(EngineError::InvalidModel(format!(
                "dense weights must be rank 2, got shape {:?}",
                weights.shape()
            )));
        };
        if bias.shape() != [1, *cols] {
            return Err(EngineError::InvalidModel(format!(
                "bias shape {:?} does not match weights {:?}",
                bias.shape(),
                [rows, cols]
            )));
        }
        if weights.data().iter().chain(bias.data()).any(|v| !v.is_finite()) {
            return Err(EngineError::InvalidModel("non-finite parameter".into()));
        }
        Ok(Self { kind: LayerKind::Dense, activation, weights, bias })
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_size(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<LayerSpec>,
}

impl Model {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, EngineError> {
        if layers.is_empty() {
            return Err(EngineError::InvalidModel("model has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(EngineError::InvalidModel(format!(
                    "layer {i} outputs {} values but layer {} takes {}",
                    pair[0].output_size(),
                    i + 1,
                    pair[1].input_size()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights from a seeded SplitMix64, zero biases.
    /// Hidden layers use `hidden_activation`; the output layer is linear.
    pub fn init(
        input_size: usize,
        hidden: &[usize],
        num_classes: usize,
        hidden_activation: Activation,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let mut sizes = vec![input_size];
        sizes.extend_from_slice(hidden);
        sizes.push(num_classes);
        if sizes.contains(&0) {
            return Err(EngineError::InvalidArgument(format!("layer sizes must be positive: {sizes:?}")));
        }
        let mut rng = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.uniform(-s, s) as f32).collect();
            let act = if i + 2 == sizes.len() { Activation::Identity } else { hidden_activation };
            layers.push(LayerSpec::dense(
                act,
                Tensor::new(vec![fan_in, fan_out], data)?,
                Tensor::zeros(vec![1, fan_out])?,
            )?);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].output_size()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LayerSpec::output_size).collect()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::output_size).sum()
    }

    /// FNV-1a over the canonical little-endian encoding of architecture and
    /// weights (layout documented in FORMATS.md).
    pub fn model_id(&self) -> Digest {
        let mut h = Fnv1a64::default();
        h.write(b"DGMD");
        h.write_u32(self.input_size() as u32);
        h.write_u32(self.num_classes() as u32);
        h.write_u32(self.layers.len() as u32);
        for l in &self.layers {
            h.write(&[0u8, l.activation.code()]);
            h.write_u32(l.input_size() as u32);
            h.write_u32(l.output_size() as u32);
            for &v in l.weights.data().iter().chain(l.bias.data()) {
                h.write_f32(v);
            }
        }
        Digest(h.finish())
    }

    fn check_input(&self, len: usize) -> Result<(), EngineError> {
        if len != self.input_size() {
            return Err(EngineError::InputSize { expected: self.input_size(), actual: len });
        }
        Ok(())
    }

    fn check_label(&self, label: u32) -> Result<(), EngineError> {
        if label as usize >= self.num_classes() {
            return Err(EngineError::LabelOutOfRange { label, num_classes: self.num_classes() });
        }
        Ok(())
    }

    /// Runs the network, returning every neuron's post-activation value and
    /// the final-layer outputs (the logits fed to softmax).
    pub fn forward(&self, input: &Tensor) -> Result<(ActivationTrace, Tensor), EngineError> {
        self.check_input(input.len())?;
        let mut h = Tensor::row(input.data().to_vec())?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let z = numerics::matmul(&h, &l.weights)?.add(&l.bias)?;
            h = l.activation.apply(&z);
            layers.push(h.data().to_vec());
        }
        Ok((ActivationTrace { input_id: String::new(), layers }, h))
    }

    /// Forward pass over a raw input slice, tagging the trace with `input_id`.
    pub fn capture(&self, input_id: impl Into<String>, input: &[f32]) -> Result<ActivationTrace, EngineError> {
        self.check_input(input.len())?;
        let (mut trace, _) = self.forward(&Tensor::row(input.to_vec())?)?;
        trace.input_id = input_id.into();
        Ok(trace)
    }

    pub fn predict(&self, input: &Tensor) -> Result<usize, EngineError> {
        let (_, logits) = self.forward(input)?;
        Ok(numerics::argmax(&logits)?)
    }

    pub fn loss_and_gradients(&self, input: &Tensor, label: u32) -> Result<Gradients, EngineError> {
        Ok(self.loss_and_gradients_f64(input.data(), label)?.to_f32())
    }

    /// Softmax cross-entropy loss with exact backpropagated gradients,
    /// evaluated entirely in `f64` over the model's parameters.
    pub fn loss_and_gradients_f64(&self, input: &[f32], label: u32) -> Result<GradientsF64, EngineError> {
        self.check_input(input.len())?;
        self.check_label(label)?;
        let shapes: Vec<[usize; 2]> = self.layers.iter().map(|l| [l.input_size(), l.output_size()]).collect();

        // Forward, keeping pre- and post-activations.
        let mut acts: Vec<Vec<f64>> = vec![input.iter().map(|&v| f64::from(v)).collect()];
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let h = acts.last().expect("input row");
            let (n_in, n_out) = (l.input_size(), l.output_size());
            let w = l.weights.data();
            let mut z: Vec<f64> = l.bias.data().iter().map(|&b| f64::from(b)).collect();
            for i in 0..n_in {
                let hi = h[i];
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += hi * f64::from(w[i * n_out + j]);
                }
            }
            let a = z.iter().map(|&v| l.activation.apply_f64(v)).collect();
            pre.push(z);
            acts.push(a);
        }

        let logits = acts.last().expect("output row");
        let y = label as usize;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - logits[y];
        // dL/dlogit = softmax - onehot; the true-class entry is summed from
        // the other probabilities so confident predictions keep a nonzero
        // gradient instead of cancelling to 0 in 1 - p.
        let mut delta: Vec<f64> = logits.iter().map(|&v| (v - lse).exp()).collect();
        delta[y] = -delta.iter().enumerate().filter(|&(c, _)| c != y).map(|(_, &p)| p).sum::<f64>();

        let mut weight_grads = vec![Vec::new(); self.layers.len()];
        let mut bias_grads = vec![Vec::new(); self.layers.len()];
        for (li, l) in self.layers.iter().enumerate().rev() {
            let [n_in, n_out] = shapes[li];
            for (j, d) in delta.iter_mut().enumerate() {
                *d *= l.activation.derivative_f64(pre[li][j], acts[li + 1][j]);
            }
            let h = &acts[li];
            let mut gw = vec![0.0; n_in * n_out];
            let mut back = vec![0.0; n_in];
            let w = l.weights.data();
            for i in 0..n_in {
                let mut s = 0.0;
                for j in 0..n_out {
                    gw[i * n_out + j] = h[i] * delta[j];
                    s += f64::from(w[i * n_out + j]) * delta[j];
                }
                back[i] = s;
            }
            weight_grads[li] = gw;
            bias_grads[li] = delta;
            delta = back;
        }

        Ok(GradientsF64 { loss, weight_grads, bias_grads, input_grad: delta, shapes })
    }

    pub(crate) fn apply_update(&mut self, grads: &GradientsF64, lr: f64) {
        for (li, l) in self.layers.iter_mut().enumerate() {
            let step = |params: &Tensor, g: &[f64]| -> Tensor {
                let data = params.data().iter().zip(g).map(|(&p, &g)| (f64::from(p) - lr * g) as f32).collect();
                Tensor::new(params.shape().to_vec(), data).expect("same shape")
            };
            l.weights = step(&l.weights, &grads.weight_grads[li]);
            l.bias = step(&l.bias, &grads.bias_grads[li]);
        }
    }
}

/// Gradients rounded to `f32`, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f32,
    pub weight_grads: Vec<Tensor>,
    pub bias_grads: Vec<Tensor>,
    pub input_grad: Tensor,
}

/// Full-precision gradients; flat row-major buffers per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientsF64 {
    pub loss: f64,
    pub weight_grads: Vec<Vec<f64>>,
    pub bias_grads: Vec<Vec<f64>>,
    pub input_grad: Vec<f64>,
    shapes: Vec<[usize; 2]>,
}

impl GradientsF64 {
    fn zeros_like(model: &Model) -> Self {
        Self {
            loss: 0.0,
            weight_grads: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias_grads: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            input_grad: vec![0.0; model.input_size()],
            shapes: model.layers.iter().map(|l| [l.input_size(), l.output_size()]).collect(),
        }
    }

    fn accumulate(&mut self, other: &GradientsF64, scale: f64) {
        self.loss += scale * other.loss;
        let pairs = self
            .weight_grads
            .iter_mut()
            .chain(self.bias_grads.iter_mut())
            .chain(std::iter::once(&mut self.input_grad))
            .zip(other.weight_grads.iter().chain(&other.bias_grads).chain(std::iter::once(&other.input_grad)));
        for (dst, src) in pairs {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn to_f32(&self) -> Gradients {
        let tensor = |shape: Vec<usize>, v: &[f64]| {
            Tensor::new(shape, v.iter().map(|&x| x as f32).collect()).expect("gradient shape")
        };
        Gradients {
            loss: self.loss as f32,
            weight_grads: self.shapes.iter().zip(&self.weight_grads).map(|(s, g)| tensor(s.to_vec(), g)).collect(),
            bias_grads: self.shapes.iter().zip(&self.bias_grads).map(|(s, g)| tensor(vec![1, s[1]], g)).collect(),
            input_grad: tensor(vec![1, self.input_grad.len()], &self.input_grad),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}N{}", self.layer, self.index)
    }
}

/// Post-activation value of every neuron for one input, grouped by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub input_id: String,
    pub layers: Vec<Vec<f32>>,
}

impl ActivationTrace {
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn value(&self, n: NeuronId) -> Option<f32> {
        self.layers.get(n.layer)?.get(n.index).copied()
    }

    pub fn neurons(&self) -> impl Iterator<Item = (NeuronId, f32)> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, vals)| vals.iter().enumerate().map(move |(i, &v)| (NeuronId::new(l, i), v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, lr: 0.1, batch_size: 16, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the dataset before the first update.
    pub initial_loss: f64,
    /// Mean loss over the dataset after each epoch.
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
}

/// Mini-batch SGD on softmax cross-entropy. Batches are drawn from a
/// per-epoch Fisher-Yates shuffle seeded by `cfg.seed`; gradients are
/// averaged over the batch. `lr == 0` leaves the parameters untouched.
pub fn train_sgd(model: &Model, data: &Dataset, cfg: &TrainConfig) -> Result<(Model, TrainReport), EngineError> {
    if data.is_empty() {
        return Err(EngineError::InvalidArgument("training set is empty".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(EngineError::InvalidArgument(format!(
            "learning rate must be finite and non-negative, got {}",
            cfg.lr
        )));
    }
    if cfg.batch_size == 0 {
        return Err(EngineError::InvalidArgument("batch size must be positive".into()));
    }
    model.check_input(data.input_size())?;

    let mut model = model.clone();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let initial_loss = mean_loss(&model, data)?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        if cfg.lr > 0.0 {
            for batch in order.chunks(cfg.batch_size) {
                let mut acc = GradientsF64::zeros_like(&model);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let g = model.loss_and_gradients_f64(data.input(i), data.label(i))?;
                    acc.accumulate(&g, scale);
                }
                model.apply_update(&acc, cfg.lr);
            }
        }
        epoch_losses.push(mean_loss(&model, data)?);
    }
    let final_accuracy = accuracy(&model, data)?;
    Ok((model, TrainReport { initial_loss, epoch_losses, final_accuracy }))
}

pub fn mean_loss(model: &Model, data: &Dataset) -> Result<f64, EngineError> {
    let mut total = 0.0;
    for (x, y) in data.iter() {
        total += model.loss_and_gradients_f64(x, y)?.loss;
    }
    Ok(total / data.len().max(1) as f64)
}

pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64, EngineError> {
    let mut correct = 0usize;
    for (x, y) in data.iter() {
        if model.predict(&Tensor::row(x.to_vec())?)? == y as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}
