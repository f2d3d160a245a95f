//! Feedforward ReLU classifier with inverted dropout on hidden layers.
//!
//! Hidden layer `l` computes `h_l = mask_l ⊙ relu(W_l h_{l-1} + b_l) / (1 - p)`
//! when a mask set is supplied and `relu(W_l h_{l-1} + b_l)` otherwise. The
//! output layer is `softmax(W_out h_last)` and carries no bias, since a
//! constant shift of the logits leaves the softmax unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cross_entropy_label, relu, softmax_in_place, Matrix, RngStream};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub num_classes: usize,
    /// Probability of dropping a hidden unit. `0.0` gives the plain network.
    pub dropout_rate: f64,
    pub init_seed: u64,
}

impl NetworkConfig {
    /// Four hidden layers of 20 units and a 7-way output.
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: vec![20; 4],
            num_classes: 7,
            dropout_rate: 0.0,
            init_seed: 0,
        }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.hidden_layers = hidden.to_vec();
        self
    }

    pub fn with_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = num_classes;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_rate = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Widths of every layer from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_layers);
        w.push(self.num_classes);
        w
    }
}

/// One affine map. `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: self.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.as_ref().map_or(0, Vec::len)
    }

    /// All parameters, weights then bias.
    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.weights
            .as_slice()
            .iter()
            .chain(self.bias.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .as_mut_slice()
            .iter_mut()
            .chain(self.bias.iter_mut().flatten())
    }
}

/// Trained or freshly initialized network weights with their config.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
}

/// Gradient of the loss, shaped like [`NetworkParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Per-hidden-layer keep masks for one stochastic pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMaskSet {
    pub masks: Vec<Vec<bool>>,
    pub keep_prob: f64,
}

impl DropoutMaskSet {
    pub fn all_ones(config: &NetworkConfig) -> Self {
        Self {
            masks: config.hidden_layers.iter().map(|&w| vec![true; w]).collect(),
            keep_prob: 1.0 - config.dropout_rate,
        }
    }

    pub fn kept(&self) -> usize {
        self.masks.iter().flatten().filter(|&&k| k).count()
    }
}

/// Each hidden unit is kept independently with probability `1 - p`.
pub fn sample_masks(config: &NetworkConfig, rng: &mut RngStream) -> DropoutMaskSet {
    let p = config.dropout_rate;
    DropoutMaskSet {
        masks: config
            .hidden_layers
            .iter()
            .map(|&w| (0..w).map(|_| !rng.bernoulli(p)).collect())
            .collect(),
        keep_prob: 1.0 - p,
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub pre_activations: Vec<Vec<f64>>,
    /// Hidden outputs after ReLU and (if any) masking and rescaling.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl NetworkParams {
    /// He-style uniform init: weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.init_seed);
        let widths = config.widths();
        let n_layers = widths.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.uniform_range(-bound, bound))
                .collect();
            let is_output = l + 1 == n_layers;
            layers.push(Layer {
                weights: Matrix::new(fan_out, fan_in, data)?,
                bias: (!is_output).then(|| vec![0.0; fan_out]),
            });
        }
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.values().all(|v| v.is_finite()))
    }

    fn check_masks(&self, masks: &DropoutMaskSet) -> Result<()> {
        let hidden = &self.config.hidden_layers;
        if masks.masks.len() != hidden.len()
            || masks.masks.iter().zip(hidden).any(|(m, &w)| m.len() != w)
        {
            return Err(Error::dim("dropout masks do not match hidden layer widths"));
        }
        if !(masks.keep_prob > 0.0 && masks.keep_prob <= 1.0) {
            return Err(Error::invalid("keep probability must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], masks: Option<&DropoutMaskSet>) -> Result<ForwardPass> {
        if x.len() != self.config.input_dim {
            return Err(Error::dim(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.config.input_dim
            )));
        }
        if let Some(m) = masks {
            self.check_masks(m)?;
        }
        Ok(self.forward_unchecked(x, masks))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64], masks: Option<&DropoutMaskSet>) -> ForwardPass {
        let n_hidden = self.layers.len() - 1;
        let mut pre_activations = Vec::with_capacity(n_hidden);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);
        for (l, layer) in self.layers[..n_hidden].iter().enumerate() {
            let input = if l == 0 { x } else { &hidden[l - 1] };
            let mut a = layer.weights.matvec(input).expect("shape chain");
            if let Some(b) = &layer.bias {
                for (ai, bi) in a.iter_mut().zip(b) {
                    *ai += bi;
                }
            }
            let mut h: Vec<f64> = a.iter().copied().map(relu).collect();
            if let Some(m) = masks {
                let scale = 1.0 / m.keep_prob;
                for (hi, &keep) in h.iter_mut().zip(&m.masks[l]) {
                    *hi = if keep { *hi * scale } else { 0.0 };
                }
            }
            pre_activations.push(a);
            hidden.push(h);
        }
        let last = if n_hidden == 0 { x } else { &hidden[n_hidden - 1] };
        let logits = self.layers[n_hidden].weights.matvec(last).expect("shape chain");
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        ForwardPass {
            pre_activations,
            hidden,
            logits,
            probs,
        }
    }

    /// Deterministic class probabilities (no dropout).
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, None)?.probs)
    }

    /// Mean cross-entropy gradient over a batch. Returns the gradient and the
    /// mean loss. `masks`, when given, holds one mask set per row of `xs`,
    /// the same sets used for the matching forward passes.
    pub fn backward(
        &self,
        xs: &Matrix,
        labels: &[usize],
        masks: Option<&[DropoutMaskSet]>,
    ) -> Result<(Gradients, f64)> {
        if xs.rows() != labels.len() {
            return Err(Error::dim("batch rows and labels differ in length"));
        }
        if xs.cols() != self.config.input_dim {
            return Err(Error::dim("batch feature count does not match network input"));
        }
        if let Some(m) = masks {
            if m.len() != xs.rows() {
                return Err(Error::dim("need one mask set per batch row"));
            }
            for set in m {
                self.check_masks(set)?;
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.config.num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range")));
        }
        let mut grads = self.zero_gradients();
        let mut loss = 0.0;
        for (i, x) in xs.row_iter().enumerate() {
            loss += self.accumulate(x, labels[i], masks.map(|m| &m[i]), &mut grads);
        }
        let inv = 1.0 / xs.rows() as f64;
        grads.scale(inv);
        Ok((grads, loss * inv))
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    /// Adds one sample's unscaled gradient into `grads` and returns its loss.
    pub(crate) fn accumulate(
        &self,
        x: &[f64],
        label: usize,
        masks: Option<&DropoutMaskSet>,
        grads: &mut Gradients,
    ) -> f64 {
        self.accumulate_with_pass(x, label, masks, grads).0
    }

    /// Like [`Self::accumulate`], also returning the argmax of the pass.
    pub(crate) fn accumulate_with_pass(
        &self,
        x: &[f64],
        label: usize,
        masks: Option<&DropoutMaskSet>,
        grads: &mut Gradients,
    ) -> (f64, usize) {
        let pass = self.forward_unchecked(x, masks);
        let loss = cross_entropy_label(&pass.probs, label);
        let predicted = crate::math::argmax(&pass.probs);

        // dL/dz = softmax - onehot
        let mut delta = pass.probs.clone();
        delta[label] -= 1.0;

        let n_hidden = self.layers.len() - 1;
        for l in (0..=n_hidden).rev() {
            let input: &[f64] = if l == 0 { x } else { &pass.hidden[l - 1] };
            let g = &mut grads.layers[l];
            let cols = g.weights.cols();
            let gw = g.weights.as_mut_slice();
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (w, &inp) in gw[r * cols..(r + 1) * cols].iter_mut().zip(input) {
                    *w += d * inp;
                }
            }
            if let Some(gb) = &mut g.bias {
                for (b, &d) in gb.iter_mut().zip(&delta) {
                    *b += d;
                }
            }
            if l == 0 {
                break;
            }
            // back through the mask and ReLU of hidden layer l-1
            let mut dh = self.layers[l].weights.tr_matvec(&delta).expect("shape chain");
            let pre = &pass.pre_activations[l - 1];
            let mask = masks.map(|m| (&m.masks[l - 1], 1.0 / m.keep_prob));
            for (j, v) in dh.iter_mut().enumerate() {
                let mut grad = if pre[j] > 0.0 { *v } else { 0.0 };
                if let Some((m, scale)) = mask {
                    grad = if m[j] { grad * scale } else { 0.0 };
                }
                *v = grad;
            }
            delta = dh;
        }
        (loss, predicted)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocumentRef {
            format_version: MODEL_FORMAT_VERSION,
            config: &self.config,
            layers: &self.layers,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(doc.format_version));
        }
        doc.config.validate()?;
        let params = Self {
            config: doc.config,
            layers: doc.layers,
        };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_shapes(&self) -> Result<()> {
        let widths = self.config.widths();
        if self.layers.len() != widths.len() - 1 {
            return Err(Error::dim("layer count does not match config"));
        }
        for (l, (layer, pair)) in self.layers.iter().zip(widths.windows(2)).enumerate() {
            if layer.weights.shape() != (pair[1], pair[0]) {
                return Err(Error::dim(format!("layer {l} weights have wrong shape")));
            }
            let is_output = l + 1 == self.layers.len();
            match (&layer.bias, is_output) {
                (None, true) => {}
                (Some(b), false) if b.len() == pair[1] => {}
                _ => return Err(Error::dim(format!("layer {l} bias has wrong shape"))),
            }
            if !layer.values().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("layer {l} holds non-finite values")));
            }
        }
        Ok(())
    }
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for layer in &mut self.layers {
            for v in layer.values_mut() {
                *v *= s;
            }
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers.iter().flat_map(Layer::values)
    }
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format_version: u32,
    config: &'a NetworkConfig,
    layers: &'a [Layer],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    config: NetworkConfig,
    layers: Vec<Layer>,
}
