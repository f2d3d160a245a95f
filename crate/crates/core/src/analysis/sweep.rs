//! Dropout-rate sweep and knee-rule rate selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::mc::{group_by_condition, mc_predict_batch, mean_class_summary, ConditionRow};
use crate::network::{NetworkConfig, NetworkParams};
use crate::train::{train, TrainConfig, TrainTrace};

pub const DEFAULT_RATES: [f64; 5] = [0.0, 0.03, 0.1, 0.2, 0.5];
pub const DEFAULT_KNEE: f64 = 0.95;
pub const DEFAULT_MAX_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetrics {
    pub heatmap: Vec<ConditionRow>,
    /// Share of evaluation rows whose MC-mean argmax equals the label.
    pub accuracy: f64,
    /// Mean over conditions of the summed per-class variance.
    pub mean_total_variance: f64,
    /// Mean over conditions of the predictive mean on the true class.
    pub diagonal_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub rate: f64,
    #[serde(skip)]
    pub model: Option<NetworkParams>,
    #[serde(skip)]
    pub trace: Option<TrainTrace>,
    pub metrics: Option<SweepMetrics>,
    /// Set when training or inference failed for this rate.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub class_names: Vec<String>,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn rates(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.rate).collect()
    }

    pub fn entry(&self, rate: f64) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.rate == rate)
    }

    /// Copy without the given rate, e.g. to check selection stability.
    pub fn without_rate(&self, rate: f64) -> Self {
        Self {
            entries: self.entries.iter().filter(|e| e.rate != rate).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Condition-level heatmap rows plus the scalar summaries used for rate
/// selection, for one model on `eval`.
pub fn sweep_metrics(params: &NetworkParams, eval: &LabeledDataset, samples: usize, rng: &RngStream) -> Result<SweepMetrics> {
    let summaries = mc_predict_batch(params, &eval.features, samples, rng)?;
    let correct = summaries
        .iter()
        .zip(&eval.labels)
        .filter(|(s, &y)| s.predicted_class == y)
        .count();
    let heatmap = mean_class_summary(&group_by_condition(eval, &summaries)?)?;
    let labels: Vec<usize> = eval.conditions().keys().map(|&(_, y)| y).collect();
    let n = heatmap.len() as f64;
    Ok(SweepMetrics {
        accuracy: correct as f64 / eval.len() as f64,
        mean_total_variance: heatmap.iter().map(|r| r.variance.iter().sum::<f64>()).sum::<f64>() / n,
        diagonal_mean: heatmap.iter().zip(&labels).map(|(r, &y)| r.mean[y]).sum::<f64>() / n,
        heatmap,
    })
}

/// Trains one model per rate, sharing data, initialization and shuffling
/// seeds, and evaluates each on `eval` (normally the in-distribution
/// conditions). A failure at one rate is recorded in its entry.
pub fn sweep_dropout(
    rates: &[f64],
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
    train_data: &LabeledDataset,
    eval: &LabeledDataset,
    mc_samples: usize,
    mc_seed: u64,
) -> Result<SweepResult> {
    if rates.is_empty() {
        return Err(Error::invalid("at least one dropout rate required"));
    }
    for (i, &p) in rates.iter().enumerate() {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout rate {p} outside [0, 1)")));
        }
        if rates[..i].contains(&p) {
            return Err(Error::invalid(format!("dropout rate {p} listed twice")));
        }
    }
    if mc_samples == 0 {
        return Err(Error::invalid("MC sample count must be at least 1"));
    }
    train_config.validate()?;
    let rng = RngStream::new(mc_seed);
    let entries = rates
        .par_iter()
        .map(|&rate| {
            let cfg = net_config.clone().with_dropout(rate);
            let run = train(&cfg, train_config, train_data)
                .and_then(|(model, trace)| Ok((sweep_metrics(&model, eval, mc_samples, &rng)?, model, trace)));
            match run {
                Ok((metrics, model, trace)) => SweepEntry {
                    rate,
                    model: Some(model),
                    trace: Some(trace),
                    metrics: Some(metrics),
                    error: None,
                },
                Err(e) => SweepEntry { rate, model: None, trace: None, metrics: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SweepResult {
        class_names: eval.class_names.clone(),
        mc_samples,
        mc_seed,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub diagonal_mean: Option<f64>,
    pub mean_total_variance: Option<f64>,
    pub accuracy: Option<f64>,
    /// Within the knee of the baseline and below the rate cap.
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSelection {
    pub rate: f64,
    pub baseline_diagonal_mean: f64,
    pub knee: f64,
    pub max_rate: f64,
    /// No rate passed; the smallest nonzero rate was taken.
    pub fallback: bool,
    pub curve: Vec<CurvePoint>,
    pub rationale: String,
}

/// Largest rate `p` with `0 < p < max_rate` whose diagonal mean keeps at
/// least `knee` of the `p = 0` baseline. Ties toward more regularization;
/// falls back to the smallest nonzero rate when none qualifies.
pub fn select_dropout_rate(sweep: &SweepResult, knee: f64, max_rate: f64) -> Result<RateSelection> {
    if sweep.entries.len() < 3 {
        return Err(Error::invalid("rate selection needs at least three rates"));
    }
    if !(knee > 0.0 && knee <= 1.0) {
        return Err(Error::invalid("knee must lie in (0, 1]"));
    }
    let baseline = sweep
        .entry(0.0)
        .ok_or_else(|| Error::invalid("rate selection needs the p = 0 baseline"))?
        .metrics
        .as_ref()
        .ok_or_else(|| Error::invalid("the p = 0 baseline failed to train"))?
        .diagonal_mean;

    let mut entries: Vec<&SweepEntry> = sweep.entries.iter().collect();
    entries.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    let curve: Vec<CurvePoint> = entries
        .iter()
        .map(|e| {
            let m = e.metrics.as_ref();
            let diag = m.map(|m| m.diagonal_mean);
            CurvePoint {
                rate: e.rate,
                diagonal_mean: diag,
                mean_total_variance: m.map(|m| m.mean_total_variance),
                accuracy: m.map(|m| m.accuracy),
                eligible: e.rate > 0.0 && e.rate < max_rate && diag.is_some_and(|d| d >= knee * baseline),
            }
        })
        .collect();
    let chosen = curve.iter().rev().find(|c| c.eligible);
    let (rate, fallback) = match chosen {
        Some(c) => (c.rate, false),
        None => (
            curve
                .iter()
                .find(|c| c.rate > 0.0)
                .ok_or_else(|| Error::invalid("no nonzero rate in sweep"))?
                .rate,
            true,
        ),
    };
    let rationale = if fallback {
        format!("no rate kept {knee} of the baseline diagonal mean {baseline:.4}; using smallest nonzero rate {rate}")
    } else {
        format!("largest rate below {max_rate} keeping ≥ {knee} of baseline diagonal mean {baseline:.4}")
    };
    Ok(RateSelection { rate, baseline_diagonal_mean: baseline, knee, max_rate, fallback, curve, rationale })
}

impl RateSelection {
    /// `rate,diagonal_mean,mean_total_variance,accuracy,eligible`.
    pub fn curve_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("rate,diagonal_mean,mean_total_variance,accuracy,eligible\n");
        for c in &self.curve {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.rate,
                fmt(c.diagonal_mean),
                fmt(c.mean_total_variance),
                fmt(c.accuracy),
                c.eligible
            ));
        }
        out
    }
}
