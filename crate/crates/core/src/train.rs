//! Mini-batch training with Adam and evaluation.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{argmax, cross_entropy_label, Matrix, RngStream};
use crate::network::{sample_masks, Gradients, NetworkConfig, NetworkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds batch order and training-time dropout masks.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("invalid optimizer hyperparameters"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss and accuracy, measured on the stochastic
/// passes used for the updates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    /// `epoch,loss,accuracy` with 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for (i, (l, a)) in self.loss.iter().zip(&self.accuracy).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, l, a));
        }
        out
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut NetworkParams, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let values = params.layers.iter_mut().flat_map(|l| l.values_mut());
        for (((w, &g), m), v) in values.zip(grads.values()).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

fn check_compatible(config: &NetworkConfig, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if data.num_features() != config.input_dim {
        return Err(Error::dim(format!(
            "dataset has {} features, network expects {}",
            data.num_features(),
            config.input_dim
        )));
    }
    if let Some(&y) = data.labels.iter().find(|&&y| y >= config.num_classes) {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            config.num_classes
        )));
    }
    Ok(())
}

/// Trains a freshly initialized network. The result depends only on the
/// two configs and the data.
pub fn train(
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
    data: &LabeledDataset,
) -> Result<(NetworkParams, TrainTrace)> {
    train_config.validate()?;
    let mut params = NetworkParams::init(net_config)?;
    check_compatible(net_config, data)?;

    let root = RngStream::new(train_config.shuffle_seed);
    let mut order_rng = root.substream(0);
    let mut mask_rng = root.substream(1);
    let dropout = net_config.dropout_rate > 0.0;

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam::new(params.num_params());
    let mut grads = params.zero_gradients();
    let mut trace = TrainTrace::default();

    for epoch in 1..=train_config.epochs {
        order_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(train_config.batch_size) {
            grads.scale(0.0);
            for &i in batch {
                let masks = dropout.then(|| sample_masks(net_config, &mut mask_rng));
                let (loss, predicted) = params.accumulate_with_pass(
                    data.features.row(i),
                    data.labels[i],
                    masks.as_ref(),
                    &mut grads,
                );
                loss_sum += loss;
                correct += (predicted == data.labels[i]) as usize;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads, train_config);
        }
        let mean_loss = loss_sum / n as f64;
        if !mean_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.loss.push(mean_loss);
        trace.accuracy.push(correct as f64 / n as f64);
    }
    Ok((params, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Counts, rows indexed by true label, columns by prediction.
    pub confusion: Matrix,
}

/// Accuracy, loss and confusion of the deterministic (no-dropout) network.
pub fn evaluate(params: &NetworkParams, data: &LabeledDataset) -> Result<Evaluation> {
    check_compatible(&params.config, data)?;
    let c = params.config.num_classes;
    let mut confusion = Matrix::zeros(c, c);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in data.features.row_iter().zip(&data.labels) {
        let probs = params.forward(x, None)?.probs;
        let pred = argmax(&probs);
        confusion[(y, pred)] += 1.0;
        correct += (pred == y) as usize;
        loss += cross_entropy_label(&probs, y);
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: loss / n,
        confusion,
    })
}
