//! Small dense networks trained from scratch with seeded, single-threaded
//! gradient descent: the linear hinge-loss gate, the detector MLP and the
//! bottleneck autoencoder.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Transform};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Probabilities are kept this far from 0 and 1.
const PROB_FLOOR: f64 = 1e-15;

/// RNG stream used for per-epoch shuffling; stream 0 is initialization.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("training data is empty")]
    EmptyData,
    #[error("dimension mismatch: model expects {expected} inputs, data has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid bottleneck {bottleneck} for input dimension {input_dim}")]
    InvalidBottleneck { input_dim: usize, bottleneck: usize },
    #[error("expected a {expected:?} model, got {actual:?}")]
    WrongKind { expected: ModelKind, actual: ModelKind },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("curve csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearGate,
    Mlp,
    Autoencoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dense layer; `weights` is row-major with one row per output unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Per-layer values from one forward pass; `post[0]` is the input.
struct ForwardTrace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl NeuralModel {
    fn initialized(kind: ModelKind, dims: Vec<usize>, activations: Vec<Activation>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-bound..=bound))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            layer_dims: dims,
            activations,
            layers,
            seed,
        }
    }

    /// Linear model `w.x + b` with all parameters at zero.
    pub fn linear_gate(n_features: usize) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind: ModelKind::LinearGate,
            layer_dims: vec![n_features, 1],
            activations: vec![Activation::Linear],
            layers: vec![Layer {
                weights: vec![0.0; n_features],
                biases: vec![0.0],
            }],
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least one layer")
    }

    /// Index into `layer_dims` of the smallest layer.
    pub fn bottleneck_index(&self) -> usize {
        self.layer_dims
            .iter()
            .enumerate()
            .min_by_key(|&(_, d)| *d)
            .map(|(i, _)| i)
            .expect("non-empty dims")
    }

    /// Checks dims, activations and parameter shapes agree.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(NeuralError::InvalidModel(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let n_layers = self.layer_dims.len().saturating_sub(1);
        if n_layers == 0 || self.layers.len() != n_layers || self.activations.len() != n_layers {
            return Err(NeuralError::InvalidModel("layer count mismatch".into()));
        }
        if self.layer_dims.contains(&0) {
            return Err(NeuralError::InvalidModel("zero-width layer".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
            if layer.weights.len() != i * o || layer.biases.len() != o {
                return Err(NeuralError::InvalidModel(format!("layer {l} has wrong shape")));
            }
        }
        if self.kind == ModelKind::Autoencoder {
            let dims = &self.layer_dims;
            let symmetric = dims.iter().eq(dims.iter().rev());
            let b = self.bottleneck_index();
            let unique = dims.iter().filter(|&&d| d == dims[b]).count() == 1;
            if !symmetric || !unique {
                return Err(NeuralError::InvalidModel(
                    "autoencoder dims must be symmetric with a unique bottleneck".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter count");
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    fn forward_layers(&self, input: &[f64], upto: usize) -> ForwardTrace {
        let mut pre = Vec::with_capacity(upto);
        let mut post = Vec::with_capacity(upto + 1);
        post.push(input.to_vec());
        for l in 0..upto {
            let layer = &self.layers[l];
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let x = &post[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &layer.weights[o * n_in..(o + 1) * n_in];
                    row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layer.biases[o]
                })
                .collect();
            let act = self.activations[l];
            post.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
        }
        ForwardTrace { pre, post }
    }

    /// Network output for one input vector.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_layers(input, self.layers.len())
            .post
            .pop()
            .expect("output layer")
    }

    /// Output pre-activation; the decision function of the linear gate.
    pub fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward_layers(input, self.layers.len())
            .pre
            .pop()
            .expect("output layer")
    }

    /// Accumulates `scale *` the parameter gradient into `grad`, given the
    /// loss gradient with respect to the output pre-activation.
    fn backward(&self, trace: &ForwardTrace, mut delta: Vec<f64>, scale: f64, grad: &mut [f64]) {
        let offsets = self.param_offsets();
        for l in (0..self.layers.len()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let x = &trace.post[l];
            let base = offsets[l];
            for o in 0..n_out {
                let d = delta[o] * scale;
                let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += d * v;
                }
                grad[base + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.layers[l].weights;
                let act = self.activations[l - 1];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum();
                        back * act.derivative(trace.pre[l - 1][i], trace.post[l][i])
                    })
                    .collect();
            }
        }
    }

    fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.weights.len() + l.biases.len();
        }
        offsets
    }

    fn require_kind(&self, expected: ModelKind) -> Result<()> {
        if self.kind != expected {
            return Err(NeuralError::WrongKind {
                expected,
                actual: self.kind,
            });
        }
        Ok(())
    }

    fn require_input(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_features() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim(),
                actual: dataset.n_features(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Training objectives over the network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// Binary cross-entropy on a sigmoid output unit, computed from the logit.
    BinaryCrossEntropy,
    /// Squared reconstruction error summed over output units; the sample
    /// mean of it is the reported MSE.
    MeanSquared,
}

/// Loss of one sample and its gradient with respect to the output
/// pre-activation.
fn sample_loss(model: &NeuralModel, trace: &ForwardTrace, target: &[f64], loss: Loss) -> (f64, Vec<f64>) {
    let z = trace.pre.last().expect("output pre-activation");
    let a = trace.post.last().expect("output");
    match loss {
        Loss::BinaryCrossEntropy => {
            let (z, y) = (z[0], target[0]);
            let value = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            (value, vec![sigmoid(z) - y])
        }
        Loss::MeanSquared => {
            let act = *model.activations.last().expect("activation");
            let value = a.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>();
            let delta = a
                .iter()
                .zip(target)
                .zip(z)
                .map(|((&p, &t), &zz)| 2.0 * (p - t) * act.derivative(zz, p))
                .collect();
            (value, delta)
        }
    }
}

/// Mean loss and gradient over row-major `inputs` and `targets`.
pub fn loss_and_gradient(model: &NeuralModel, inputs: &[f64], targets: &[f64], loss: Loss) -> (f64, Vec<f64>) {
    let (n_in, n_out) = (model.input_dim(), model.output_dim());
    let n = inputs.len() / n_in;
    let mut grad = vec![0.0; model.n_params()];
    let mut total = 0.0;
    for s in 0..n {
        let trace = model.forward_layers(&inputs[s * n_in..(s + 1) * n_in], model.layers.len());
        let (value, delta) = sample_loss(model, &trace, &targets[s * n_out..(s + 1) * n_out], loss);
        total += value;
        model.backward(&trace, delta, 1.0 / n as f64, &mut grad);
    }
    (total / n as f64, grad)
}

/// Mean loss only.
pub fn mean_loss(model: &NeuralModel, inputs: &[f64], targets: &[f64], loss: Loss) -> f64 {
    let (n_in, n_out) = (model.input_dim(), model.output_dim());
    let n = inputs.len() / n_in;
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|s| {
            let trace = model.forward_layers(&inputs[s * n_in..(s + 1) * n_in], model.layers.len());
            sample_loss(model, &trace, &targets[s * n_out..(s + 1) * n_out], loss).0
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / n as f64
}

// ---------------------------------------------------------------------------
// Linear gate

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 200,
            learning_rate: 0.1,
        }
    }
}

/// L2-regularized mean hinge loss and its (sub)gradient for a linear gate.
/// Labels are 0/1 and mapped to -1/+1; the bias is not regularized.
pub fn hinge_loss_and_gradient(model: &NeuralModel, inputs: &[f64], labels: &[u8], lambda: f64) -> (f64, Vec<f64>) {
    let f = model.input_dim();
    let w = &model.layers[0].weights;
    let b = model.layers[0].biases[0];
    let n = labels.len();
    let mut grad = vec![0.0; f + 1];
    let mut loss = 0.0;
    for (s, &label) in labels.iter().enumerate() {
        let x = &inputs[s * f..(s + 1) * f];
        let y = if label == 1 { 1.0 } else { -1.0 };
        let margin = y * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b);
        if margin < 1.0 {
            loss += 1.0 - margin;
            for (g, v) in grad[..f].iter_mut().zip(x) {
                *g -= y * v;
            }
            grad[f] -= y;
        }
    }
    let inv = 1.0 / n as f64;
    for g in &mut grad {
        *g *= inv;
    }
    let mut penalty = 0.0;
    for (g, wi) in grad[..f].iter_mut().zip(w) {
        *g += lambda * wi;
        penalty += wi * wi;
    }
    (loss * inv + 0.5 * lambda * penalty, grad)
}

pub fn gate_train(learn: &Dataset) -> Result<NeuralModel> {
    gate_train_with(learn, &GateConfig::default())
}

/// Full-batch gradient descent on the hinge objective from zero weights.
pub fn gate_train_with(learn: &Dataset, config: &GateConfig) -> Result<NeuralModel> {
    let n = learn.n_samples();
    if n == 0 {
        return Err(NeuralError::EmptyData);
    }
    let positives = learn.labels().iter().filter(|&&l| l == 1).count();
    if n < 2 || positives == 0 || positives == n {
        return Err(NeuralError::SingleClassData);
    }
    let rows: Vec<usize> = (0..n).collect();
    let inputs = learn.rows_matrix(&rows);
    let mut model = NeuralModel::linear_gate(learn.n_features());
    for epoch in 1..=config.epochs {
        let (loss, grad) = hinge_loss_and_gradient(&model, &inputs, learn.labels(), config.lambda);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        let layer = &mut model.layers[0];
        let f = layer.weights.len();
        for (w, g) in layer.weights.iter_mut().zip(&grad[..f]) {
            *w -= config.learning_rate * g;
        }
        layer.biases[0] -= config.learning_rate * grad[f];
    }
    Ok(model)
}

/// Gate decision values `w.x + b`.
pub fn gate_decision(model: &NeuralModel, dataset: &Dataset) -> Result<Vec<f64>> {
    model.require_kind(ModelKind::LinearGate)?;
    model.require_input(dataset)?;
    Ok((0..dataset.n_samples())
        .into_par_iter()
        .map(|r| model.logits(&dataset.row(r))[0])
        .collect())
}

pub fn gate_predict(model: &NeuralModel, dataset: &Dataset) -> Result<Vec<u8>> {
    Ok(gate_decision(model, dataset)?
        .into_iter()
        .map(|d| u8::from(d >= 0.0))
        .collect())
}

// ---------------------------------------------------------------------------
// MLP and autoencoder

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch: 10,
            learning_rate: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch train (TLC) and validation (VLC) losses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochLoss>,
}

impl TrainingCurve {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dims `[f, 2f, 2f, 1]`, relu hidden layers and a sigmoid output.
pub fn mlp_new(n_features: usize, seed: u64) -> NeuralModel {
    assert!(n_features >= 1, "mlp needs at least one feature");
    let h = 2 * n_features;
    NeuralModel::initialized(
        ModelKind::Mlp,
        vec![n_features, h, h, 1],
        vec![Activation::Relu, Activation::Relu, Activation::Sigmoid],
        seed,
    )
}

/// Symmetric funnel `[d, m, b, m, d]` with `m = ceil((d + b) / 2)`.
pub fn ae_new(input_dim: usize, bottleneck: usize, seed: u64) -> Result<NeuralModel> {
    if bottleneck == 0 || bottleneck >= input_dim {
        return Err(NeuralError::InvalidBottleneck { input_dim, bottleneck });
    }
    let mid = (input_dim + bottleneck).div_ceil(2);
    Ok(NeuralModel::initialized(
        ModelKind::Autoencoder,
        vec![input_dim, mid, bottleneck, mid, input_dim],
        vec![Activation::Relu, Activation::Relu, Activation::Relu, Activation::Sigmoid],
        seed,
    ))
}

fn all_rows(dataset: &Dataset) -> Vec<f64> {
    let rows: Vec<usize> = (0..dataset.n_samples()).collect();
    dataset.rows_matrix(&rows)
}

fn label_targets(dataset: &Dataset) -> Vec<f64> {
    dataset.labels().iter().map(|&l| f64::from(l)).collect()
}

#[allow(clippy::too_many_arguments)]
fn sgd(
    model: &mut NeuralModel,
    inputs: &[f64],
    targets: &[f64],
    val_inputs: &[f64],
    val_targets: &[f64],
    loss: Loss,
    config: &SgdConfig,
) -> Result<TrainingCurve> {
    let (n_in, n_out) = (model.input_dim(), model.output_dim());
    let n = inputs.len() / n_in;
    let batch = config.batch.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = TrainingCurve::default();
    let mut grad = vec![0.0; model.n_params()];
    let mut params = model.params();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &s in chunk {
                let trace = model.forward_layers(&inputs[s * n_in..(s + 1) * n_in], model.layers.len());
                let (value, delta) = sample_loss(model, &trace, &targets[s * n_out..(s + 1) * n_out], loss);
                epoch_loss += value;
                model.backward(&trace, delta, scale, &mut grad);
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
            model.set_params(&params);
        }
        let train_loss = epoch_loss / n as f64;
        let val_loss = mean_loss(model, val_inputs, val_targets, loss);
        if !train_loss.is_finite() || !val_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        curve.epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok(curve)
}

/// Mini-batch SGD on binary cross-entropy, reshuffling every epoch.
pub fn mlp_train(
    model: &mut NeuralModel,
    learn: &Dataset,
    validation: &Dataset,
    config: &SgdConfig,
) -> Result<TrainingCurve> {
    model.require_kind(ModelKind::Mlp)?;
    model.require_input(learn)?;
    model.require_input(validation)?;
    if learn.n_samples() == 0 || validation.n_samples() == 0 {
        return Err(NeuralError::EmptyData);
    }
    sgd(
        model,
        &all_rows(learn),
        &label_targets(learn),
        &all_rows(validation),
        &label_targets(validation),
        Loss::BinaryCrossEntropy,
        config,
    )
}

/// Malware probabilities, strictly inside (0, 1).
pub fn mlp_predict(model: &NeuralModel, dataset: &Dataset) -> Result<Vec<f64>> {
    model.require_input(dataset)?;
    Ok((0..dataset.n_samples())
        .into_par_iter()
        .map(|r| model.forward(&dataset.row(r))[0].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
        .collect())
}

pub fn classify(probabilities: &[f64]) -> Vec<u8> {
    probabilities.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

/// Mini-batch SGD on mean squared reconstruction error.
pub fn ae_train(
    model: &mut NeuralModel,
    learn: &Dataset,
    validation: &Dataset,
    config: &SgdConfig,
) -> Result<TrainingCurve> {
    model.require_kind(ModelKind::Autoencoder)?;
    model.require_input(learn)?;
    model.require_input(validation)?;
    if learn.n_samples() == 0 || validation.n_samples() == 0 {
        return Err(NeuralError::EmptyData);
    }
    let inputs = all_rows(learn);
    let val_inputs = all_rows(validation);
    sgd(model, &inputs, &inputs, &val_inputs, &val_inputs, Loss::MeanSquared, config)
}

/// Bottleneck activations as a new dataset with features `f1..fb`.
pub fn ae_encode(model: &NeuralModel, dataset: &Dataset) -> Result<Dataset> {
    model.require_kind(ModelKind::Autoencoder)?;
    model.require_input(dataset)?;
    let b = model.bottleneck_index();
    let width = model.layer_dims[b];
    let encoded: Vec<Vec<f64>> = (0..dataset.n_samples())
        .into_par_iter()
        .map(|r| {
            model
                .forward_layers(&dataset.row(r), b)
                .post
                .pop()
                .expect("bottleneck")
        })
        .collect();
    let columns = (0..width)
        .map(|j| encoded.iter().map(|row| row[j]).collect())
        .collect();
    let names = (1..=width).map(|j| format!("f{j}")).collect();
    Ok(dataset.map_columns(
        names,
        columns,
        Transform::Encoded {
            bottleneck: width,
            model_seed: model.seed,
        },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_1d(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(vec!["x".into()], vec![xs], labels).unwrap()
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let labels = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        Dataset::new(vec!["a".into(), "b".into()], vec![a, b], labels).unwrap()
    }

    fn accuracy(pred: &[u8], labels: &[u8]) -> f64 {
        pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
    }

    #[test]
    fn gate_separates_trivial_data() {
        let ds = separable_1d(100);
        let model = gate_train(&ds).unwrap();
        let pred = gate_predict(&model, &ds).unwrap();
        assert_eq!(accuracy(&pred, ds.labels()), 1.0);
    }

    #[test]
    fn gate_on_noise_tracks_majority_rate() {
        let ds = noisy(2000, 5);
        let model = gate_train(&ds).unwrap();
        let acc = accuracy(&gate_predict(&model, &ds).unwrap(), ds.labels());
        let pos = ds.labels().iter().filter(|&&l| l == 1).count() as f64 / 2000.0;
        let majority = pos.max(1.0 - pos);
        assert!((acc - majority).abs() <= 0.05, "acc {acc} majority {majority}");
    }

    #[test]
    fn gate_with_duplicated_column_predicts_the_same_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let labels: Vec<u8> = x.iter().map(|&v| u8::from(v + 0.1 * rng.random::<f64>() > 0.55)).collect();
        let single = Dataset::new(vec!["x".into()], vec![x.clone()], labels.clone()).unwrap();
        let double = Dataset::new(vec!["x".into(), "y".into()], vec![x.clone(), x], labels).unwrap();
        let a = gate_train(&single).unwrap();
        let b = gate_train(&double).unwrap();
        assert_eq!(gate_predict(&a, &single).unwrap(), gate_predict(&b, &double).unwrap());
        let wb = &b.layers[0].weights;
        assert_eq!(wb[0], wb[1]);
    }

    #[test]
    fn gate_rejects_single_class() {
        let ds = Dataset::new(vec!["x".into()], vec![vec![1.0, 2.0]], vec![1, 1]).unwrap();
        assert!(matches!(gate_train(&ds), Err(NeuralError::SingleClassData)));
    }

    #[test]
    fn mlp_shapes() {
        assert_eq!(mlp_new(11, 0).layer_dims, vec![11, 22, 22, 1]);
        assert_eq!(mlp_new(33, 0).layer_dims, vec![33, 66, 66, 1]);
        assert_eq!(mlp_new(1, 0).layer_dims, vec![1, 2, 2, 1]);
        let m = mlp_new(4, 3);
        let bound = 0.5;
        assert!(m.layers[0].weights.iter().all(|w| w.abs() <= bound));
        m.validate().unwrap();
    }

    #[test]
    fn mlp_training_decreases_loss_and_is_deterministic() {
        let base = noisy(400, 5);
        let signal: Vec<f64> = base.labels().iter().map(|&l| 0.25 + 0.5 * f64::from(l)).collect();
        let ds = Dataset::new(
            vec!["a".into(), "b".into(), "s".into()],
            vec![base.column(0).to_vec(), base.column(1).to_vec(), signal],
            base.labels().to_vec(),
        )
        .unwrap();
        let run = || {
            let mut m = mlp_new(3, 17);
            let curve = mlp_train(&mut m, &ds, &ds, &SgdConfig::default()).unwrap();
            (m, curve)
        };
        let (m1, c1) = run();
        let (m2, c2) = run();
        assert_eq!(c1, c2);
        assert_eq!(m1, m2);
        let losses = c1.train_losses();
        assert!(losses.last().unwrap() < &(losses[0] * 0.5), "{losses:?}");
        let probs = mlp_predict(&m1, &ds).unwrap();
        assert_eq!(crate::metrics::roc_auc(&probs, ds.labels()), Some(1.0));
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let ds = separable_1d(20);
        let mut m = mlp_new(1, 2);
        let before = m.clone();
        let curve = mlp_train(&mut m, &ds, &ds, &SgdConfig { epochs: 0, ..SgdConfig::default() }).unwrap();
        assert!(curve.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn zero_weights_predict_one_half() {
        let mut m = mlp_new(3, 1);
        let zeros = vec![0.0; m.n_params()];
        m.set_params(&zeros);
        let ds = noisy(5, 1).project(&["a".into(), "b".into()], "t").unwrap();
        let ds = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![ds.column(0).to_vec(), ds.column(1).to_vec(), ds.column(0).to_vec()],
            ds.labels().to_vec(),
        )
        .unwrap();
        assert!(mlp_predict(&m, &ds).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = mlp_new(3, 1);
        assert!(matches!(
            mlp_predict(&m, &separable_1d(4)),
            Err(NeuralError::DimensionMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn autoencoder_shapes() {
        assert_eq!(ae_new(33, 11, 0).unwrap().layer_dims, vec![33, 22, 11, 22, 33]);
        assert_eq!(ae_new(4, 2, 0).unwrap().layer_dims, vec![4, 3, 2, 3, 4]);
        assert!(matches!(ae_new(4, 4, 0), Err(NeuralError::InvalidBottleneck { .. })));
        assert!(matches!(ae_new(4, 0, 0), Err(NeuralError::InvalidBottleneck { .. })));
        ae_new(2, 1, 0).unwrap().validate().unwrap();
    }

    #[test]
    fn autoencoder_learns_constant_data() {
        let n = 2000;
        let columns = vec![vec![0.3; n], vec![0.7; n], vec![0.5; n], vec![0.9; n]];
        let names = (0..4).map(|i| format!("c{i}")).collect();
        let ds = Dataset::new(names, columns, vec![0; n]).unwrap();
        let mut m = ae_new(4, 2, 4).unwrap();
        let curve = ae_train(&mut m, &ds, &ds, &SgdConfig::default()).unwrap();
        assert_eq!(curve.len(), 10);
        assert!(curve.epochs[9].val_loss < 1e-3, "{curve:?}");
        let enc = ae_encode(&m, &ds).unwrap();
        assert_eq!(enc.feature_names(), &["f1", "f2"]);
        assert_eq!(enc.n_samples(), n);
        assert_eq!(enc.row(0), enc.row(n - 1));
    }

    #[test]
    fn model_json_round_trip() {
        let m = ae_new(6, 2, 8).unwrap();
        let back = NeuralModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.clone();
        bad.layers[1].biases.pop();
        assert!(NeuralModel::from_json(&bad.to_json().unwrap()).is_err());
    }

    #[test]
    fn curve_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let curve = TrainingCurve {
            epochs: vec![EpochLoss { epoch: 1, train_loss: 0.5, val_loss: 0.25 }],
        };
        let p = dir.path().join("c.csv");
        curve.write_csv(&p).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "epoch,train_loss,val_loss\n1,0.5,0.25\n");
    }
}
