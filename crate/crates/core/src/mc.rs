//! Monte-Carlo dropout prediction.
//!
//! An input is pushed through the network `T` times, each time with freshly
//! drawn dropout masks. The per-class sample mean of the `T` softmax
//! vectors is the predictive mean; their per-class population variance
//! `(1/T) Σ (ŷ_k - mean)²` is the predictive variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{argmax, Matrix, RngStream};
use crate::network::{sample_masks, NetworkParams};

pub const DEFAULT_MC_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(rename = "T")]
    pub samples: usize,
    pub predicted_class: usize,
}

impl PredictiveSummary {
    fn from_moments(mean: Vec<f64>, variance: Vec<f64>, samples: usize) -> Self {
        let variance: Vec<f64> = variance.into_iter().map(|v| v.clamp(0.0, 0.25)).collect();
        Self {
            std: variance.iter().map(|v| v.sqrt()).collect(),
            predicted_class: argmax(&mean),
            mean,
            variance,
            samples,
        }
    }

    /// Zero-variance summary of a single deterministic output.
    pub fn point(probs: Vec<f64>) -> Self {
        let c = probs.len();
        Self::from_moments(probs, vec![0.0; c], 1)
    }

    pub fn num_classes(&self) -> usize {
        self.mean.len()
    }

    pub fn total_variance(&self) -> f64 {
        self.variance.iter().sum()
    }
}

/// `T` stochastic passes on one input. With a zero dropout rate every pass
/// is identical, so the network is evaluated once and the variance is
/// exactly zero.
pub fn mc_predict(
    params: &NetworkParams,
    x: &[f64],
    samples: usize,
    rng: &mut RngStream,
) -> Result<PredictiveSummary> {
    if samples < 1 {
        return Err(Error::invalid("MC sample count must be at least 1"));
    }
    if params.config.dropout_rate == 0.0 {
        let probs = params.forward(x, None)?.probs;
        let c = probs.len();
        return Ok(PredictiveSummary::from_moments(probs, vec![0.0; c], samples));
    }
    // validates the input once; later passes skip the checks
    params.forward(x, None)?;
    let c = params.config.num_classes;
    let mut mean = vec![0.0; c];
    let mut m2 = vec![0.0; c];
    for k in 1..=samples {
        let masks = sample_masks(&params.config, rng);
        let probs = params.forward_unchecked(x, Some(&masks)).probs;
        // Welford update
        for ((m, s), p) in mean.iter_mut().zip(&mut m2).zip(&probs) {
            let delta = p - *m;
            *m += delta / k as f64;
            *s += delta * (p - *m);
        }
    }
    let variance = m2.into_iter().map(|s| s / samples as f64).collect();
    Ok(PredictiveSummary::from_moments(mean, variance, samples))
}

/// Row `i` of `xs` is evaluated with `rng.substream(i)`, so the result does
/// not depend on evaluation order or thread count.
pub fn mc_predict_batch(
    params: &NetworkParams,
    xs: &Matrix,
    samples: usize,
    rng: &RngStream,
) -> Result<Vec<PredictiveSummary>> {
    let keys: Vec<u64> = (0..xs.rows() as u64).collect();
    mc_predict_keyed(params, xs, &keys, samples, rng)
}

/// Like [`mc_predict_batch`] with caller-chosen substream keys, one per
/// row. Permuting rows together with their keys permutes the output.
pub fn mc_predict_keyed(
    params: &NetworkParams,
    xs: &Matrix,
    keys: &[u64],
    samples: usize,
    rng: &RngStream,
) -> Result<Vec<PredictiveSummary>> {
    if keys.len() != xs.rows() {
        return Err(Error::dim("need one substream key per row"));
    }
    (0..xs.rows())
        .into_par_iter()
        .map(|i| mc_predict(params, xs.row(i), samples, &mut rng.substream(keys[i])))
        .collect()
}

/// Averages over the summaries of one condition: the data behind one
/// heatmap row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: String,
    pub count: usize,
    /// Mean of member predictive means.
    pub mean: Vec<f64>,
    /// Mean of member predictive variances.
    pub variance: Vec<f64>,
    /// Variance over all pooled MC draws of the group (law of total variance).
    pub pooled_variance: Vec<f64>,
}

pub fn mean_class_summary(groups: &[(String, Vec<PredictiveSummary>)]) -> Result<Vec<ConditionRow>> {
    groups
        .iter()
        .map(|(name, members)| {
            let first = members
                .first()
                .ok_or_else(|| Error::invalid(format!("condition `{name}` has no members")))?;
            let c = first.num_classes();
            if members.iter().any(|s| s.num_classes() != c) {
                return Err(Error::dim(format!("condition `{name}` mixes class counts")));
            }
            let total_t: f64 = members.iter().map(|s| s.samples as f64).sum();
            let n = members.len() as f64;
            let mut mean = vec![0.0; c];
            let mut variance = vec![0.0; c];
            let mut pooled_mean = vec![0.0; c];
            for s in members {
                let w = s.samples as f64 / total_t;
                for j in 0..c {
                    mean[j] += s.mean[j] / n;
                    variance[j] += s.variance[j] / n;
                    pooled_mean[j] += w * s.mean[j];
                }
            }
            let mut pooled_variance = vec![0.0; c];
            for s in members {
                let w = s.samples as f64 / total_t;
                for j in 0..c {
                    pooled_variance[j] += w * (s.variance[j] + (s.mean[j] - pooled_mean[j]).powi(2));
                }
            }
            Ok(ConditionRow {
                condition: name.clone(),
                count: members.len(),
                mean,
                variance,
                pooled_variance,
            })
        })
        .collect()
}

/// Groups summaries (one per row of `data`, in row order) by
/// `(severity, label)` condition, ordered by severity then label.
pub fn group_by_condition(
    data: &LabeledDataset,
    summaries: &[PredictiveSummary],
) -> Result<Vec<(String, Vec<PredictiveSummary>)>> {
    if summaries.len() != data.len() {
        return Err(Error::dim("need one summary per dataset row"));
    }
    Ok(data
        .conditions()
        .into_iter()
        .map(|((sev, label), idx)| {
            (
                data.condition_name(label, sev),
                idx.iter().map(|&i| summaries[i].clone()).collect(),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapQuantity {
    Mean,
    Variance,
    PooledVariance,
}

/// Conditions × classes matrix as CSV: header `condition,<class…>`.
pub fn heatmap_csv(rows: &[ConditionRow], class_names: &[String], quantity: HeatmapQuantity) -> String {
    let mut out = String::from("condition");
    for c in class_names {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for row in rows {
        let values = match quantity {
            HeatmapQuantity::Mean => &row.mean,
            HeatmapQuantity::Variance => &row.variance,
            HeatmapQuantity::PooledVariance => &row.pooled_variance,
        };
        out.push_str(&row.condition);
        for v in values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    fn net(p: f64) -> NetworkParams {
        NetworkParams::init(&NetworkConfig::new(3).with_hidden(&[6, 5]).with_classes(4).with_dropout(p).with_seed(2))
            .unwrap()
    }

    #[test]
    fn zero_rate_gives_zero_variance_and_deterministic_mean() {
        let params = net(0.0);
        let x = [0.5, -0.25, 1.0];
        for t in [1, 7, 100] {
            let s = mc_predict(&params, &x, t, &mut RngStream::new(1)).unwrap();
            assert!(s.variance.iter().all(|&v| v == 0.0));
            assert!(s.std.iter().all(|&v| v == 0.0));
            assert_eq!(s.mean, params.predict(&x).unwrap());
            assert_eq!(s.samples, t);
        }
    }

    #[test]
    fn summary_invariants_hold() {
        let params = net(0.5);
        let mut rng = RngStream::new(4);
        for _ in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
            let s = mc_predict(&params, &x, 50, &mut rng).unwrap();
            assert!((s.mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(s.mean.iter().all(|&m| (0.0..=1.0).contains(&m)));
            assert!(s.variance.iter().all(|&v| (0.0..=0.25).contains(&v)));
            for (sd, v) in s.std.iter().zip(&s.variance) {
                assert_eq!(*sd, v.sqrt());
            }
            assert_eq!(s.predicted_class, argmax(&s.mean));
        }
    }

    #[test]
    fn rejects_zero_samples() {
        assert!(mc_predict(&net(0.1), &[0.0; 3], 0, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn batch_rows_use_keyed_substreams() {
        let params = net(0.3);
        let xs = Matrix::from_rows(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.0], [2.0, 0.5, -0.5]]).unwrap();
        let rng = RngStream::new(10);
        let batch = mc_predict_batch(&params, &xs, 40, &rng).unwrap();
        for (i, s) in batch.iter().enumerate() {
            let direct = mc_predict(&params, xs.row(i), 40, &mut rng.substream(i as u64)).unwrap();
            assert_eq!(&direct, s);
        }
        let one = mc_predict_batch(&params, &xs.select_rows(&[0]).unwrap(), 40, &rng).unwrap();
        assert_eq!(one[0], batch[0]);
    }

    #[test]
    fn permuting_rows_with_keys_permutes_outputs() {
        let params = net(0.3);
        let xs = Matrix::from_rows(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.0], [2.0, 0.5, -0.5], [0.0, 0.0, 1.0]]).unwrap();
        let rng = RngStream::new(12);
        let keys = [0u64, 1, 2, 3];
        let base = mc_predict_keyed(&params, &xs, &keys, 30, &rng).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xs_p = xs.select_rows(&perm).unwrap();
        let keys_p: Vec<u64> = perm.iter().map(|&i| keys[i]).collect();
        let permuted = mc_predict_keyed(&params, &xs_p, &keys_p, 30, &rng).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(permuted[k], base[i]);
        }
    }

    #[test]
    fn zero_rate_batch_has_zero_variance() {
        let xs = Matrix::from_rows(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.0]]).unwrap();
        let out = mc_predict_batch(&net(0.0), &xs, 20, &RngStream::new(0)).unwrap();
        assert!(out.iter().all(|s| s.total_variance() == 0.0));
    }

    #[test]
    fn condition_rows() {
        let a = PredictiveSummary::from_moments(vec![0.8, 0.2], vec![0.01, 0.01], 10);
        let b = PredictiveSummary::from_moments(vec![0.4, 0.6], vec![0.03, 0.03], 10);
        let rows = mean_class_summary(&[("A".into(), vec![a.clone(), a.clone()]), ("B".into(), vec![a.clone(), b.clone()])])
            .unwrap();
        assert_eq!(rows[0].mean, a.mean);
        assert_eq!(rows[0].variance, a.variance);
        assert_eq!(rows[0].pooled_variance, a.variance);
        assert!((rows[1].mean[0] - 0.6).abs() < 1e-15);
        assert!((rows[1].variance[0] - 0.02).abs() < 1e-15);
        // 0.02 + spread of the two means around 0.6
        assert!((rows[1].pooled_variance[0] - 0.06).abs() < 1e-12);

        let swapped = mean_class_summary(&[("B".into(), vec![a.clone(), b.clone()]), ("A".into(), vec![a.clone(), a])])
            .unwrap();
        assert_eq!(swapped[0].mean, rows[1].mean);
        assert_eq!(swapped[1].mean, rows[0].mean);
        assert!(mean_class_summary(&[("empty".into(), vec![])]).is_err());
    }

    #[test]
    fn heatmap_csv_layout() {
        let row = ConditionRow {
            condition: "NM".into(),
            count: 1,
            mean: vec![0.75, 0.25],
            variance: vec![0.0, 0.5],
            pooled_variance: vec![0.0, 0.5],
        };
        let csv = heatmap_csv(&[row], &["NM".into(), "F".into()], HeatmapQuantity::Mean);
        assert_eq!(csv, "condition,NM,F\nNM,0.75,0.25\n");
    }

    #[test]
    fn summary_json_field_names() {
        let s = PredictiveSummary::from_moments(vec![0.5, 0.5], vec![0.0, 0.0], 3);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"mean":[0.5,0.5],"variance":[0.0,0.0],"std":[0.0,0.0],"T":3,"predicted_class":0}"#);
    }
}
