//! Turning network outputs into candidate diagnosis sets.
//!
//! A class is a candidate when its (mean) probability exceeds the
//! probability threshold, or — for MC-dropout summaries — when its share of
//! the total predictive standard deviation exceeds the std-ratio threshold.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::PredictiveSummary;

pub const DEFAULT_PROB_THRESHOLD: f64 = 0.2;
pub const DEFAULT_STD_RATIO_THRESHOLD: f64 = 0.1;

/// Denominator of the std ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdRatioBase {
    /// `std_i / Σ_j std_j`; the ratios sum to one.
    #[default]
    Sum,
    /// `std_i / max_j std_j`.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub prob: f64,
    /// `None` for plain softmax diagnosis.
    pub std_ratio: Option<f64>,
    pub base: StdRatioBase,
}

impl Thresholds {
    pub fn softmax(prob: f64) -> Result<Self> {
        check_threshold(prob)?;
        Ok(Self { prob, std_ratio: None, base: StdRatioBase::Sum })
    }

    pub fn mc(prob: f64, std_ratio: f64, base: StdRatioBase) -> Result<Self> {
        check_threshold(prob)?;
        check_threshold(std_ratio)?;
        Ok(Self { prob, std_ratio: Some(std_ratio), base })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            prob: DEFAULT_PROB_THRESHOLD,
            std_ratio: Some(DEFAULT_STD_RATIO_THRESHOLD),
            base: StdRatioBase::Sum,
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold {t} must lie in (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Prob,
    Variance,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub mean_prob: f64,
    pub std_ratio: f64,
    pub triggered_by: Option<Trigger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    /// Candidates by descending probability (ties by class id).
    pub candidate_labels: Vec<usize>,
    /// One entry per class.
    pub evidence: Vec<Evidence>,
    pub thresholds: Thresholds,
    pub true_label: Option<usize>,
}

impl DiagnosisReport {
    pub fn contains(&self, label: usize) -> bool {
        self.candidate_labels.contains(&label)
    }

    pub fn with_true_label(mut self, label: usize) -> Self {
        self.true_label = Some(label);
        self
    }

    pub fn is_hit(&self) -> Option<bool> {
        self.true_label.map(|y| self.contains(y))
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::dim("empty probability vector"));
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("not a probability vector"));
    }
    Ok(())
}

fn build(mean: &[f64], ratios: Vec<f64>, thresholds: Thresholds) -> DiagnosisReport {
    let evidence: Vec<Evidence> = mean
        .iter()
        .zip(ratios)
        .map(|(&m, r)| {
            let by_prob = m > thresholds.prob;
            let by_var = thresholds.std_ratio.is_some_and(|t| r > t);
            let triggered_by = match (by_prob, by_var) {
                (true, true) => Some(Trigger::Both),
                (true, false) => Some(Trigger::Prob),
                (false, true) => Some(Trigger::Variance),
                (false, false) => None,
            };
            Evidence { mean_prob: m, std_ratio: r, triggered_by }
        })
        .collect();
    let mut candidate_labels: Vec<usize> = (0..mean.len()).filter(|&i| evidence[i].triggered_by.is_some()).collect();
    candidate_labels.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    DiagnosisReport { candidate_labels, evidence, thresholds, true_label: None }
}

/// `{i : probs_i > prob_threshold}`.
pub fn diagnose_softmax(probs: &[f64], prob_threshold: f64) -> Result<DiagnosisReport> {
    let thresholds = Thresholds::softmax(prob_threshold)?;
    check_distribution(probs)?;
    Ok(build(probs, vec![0.0; probs.len()], thresholds))
}

/// Std ratios of a summary. All zero when every std is zero.
pub fn std_ratios(std: &[f64], base: StdRatioBase) -> Vec<f64> {
    let denom = match base {
        StdRatioBase::Sum => std.iter().sum::<f64>(),
        StdRatioBase::Max => std.iter().copied().fold(0.0, f64::max),
    };
    if denom > 0.0 {
        std.iter().map(|s| s / denom).collect()
    } else {
        vec![0.0; std.len()]
    }
}

/// `{i : mean_i > prob} ∪ {i : ratio_i > std_ratio}`.
pub fn diagnose_mc(
    summary: &PredictiveSummary,
    prob_threshold: f64,
    std_ratio_threshold: f64,
    base: StdRatioBase,
) -> Result<DiagnosisReport> {
    let thresholds = Thresholds::mc(prob_threshold, std_ratio_threshold, base)?;
    check_distribution(&summary.mean)?;
    if summary.std.len() != summary.mean.len() {
        return Err(Error::dim("mean and std lengths differ"));
    }
    Ok(build(&summary.mean, std_ratios(&summary.std, base), thresholds))
}

/// Condition-level outcome for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDiagnosis {
    pub set: Vec<usize>,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub condition: String,
    pub true_label: usize,
    pub count: usize,
    pub non_dropout: ConditionDiagnosis,
    pub mc_dropout: ConditionDiagnosis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisTable {
    pub class_names: Vec<String>,
    pub rows: Vec<DiagnosisRow>,
}

/// One condition's member reports from both networks, index-aligned.
#[derive(Debug, Clone)]
pub struct ConditionReports {
    pub condition: String,
    pub true_label: usize,
    pub non_dropout: Vec<DiagnosisReport>,
    pub mc_dropout: Vec<DiagnosisReport>,
}

/// Labels appearing in more than half the reports, ordered by how often
/// they appear (ties by mean probability, then class id).
pub fn majority_set(reports: &[DiagnosisReport]) -> Vec<usize> {
    let mut votes: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for r in reports {
        for &l in &r.candidate_labels {
            let e = votes.entry(l).or_default();
            e.0 += 1;
            e.1 += r.evidence[l].mean_prob;
        }
    }
    let n = reports.len();
    let mut set: Vec<(usize, usize, f64)> = votes
        .into_iter()
        .filter(|&(_, (v, _))| 2 * v > n)
        .map(|(l, (v, p))| (l, v, p))
        .collect();
    set.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
    set.into_iter().map(|(l, _, _)| l).collect()
}

pub fn diagnosis_table(groups: &[ConditionReports], class_names: &[String]) -> Result<DiagnosisTable> {
    let rows = groups
        .iter()
        .map(|g| {
            if g.non_dropout.is_empty() || g.mc_dropout.is_empty() {
                return Err(Error::invalid(format!("condition `{}` has no reports", g.condition)));
            }
            if g.true_label >= class_names.len() {
                return Err(Error::invalid(format!("true label {} out of range", g.true_label)));
            }
            let summarize = |reports: &[DiagnosisReport]| {
                let set = majority_set(reports);
                ConditionDiagnosis { hit: set.contains(&g.true_label), set }
            };
            Ok(DiagnosisRow {
                condition: g.condition.clone(),
                true_label: g.true_label,
                count: g.mc_dropout.len(),
                non_dropout: summarize(&g.non_dropout),
                mc_dropout: summarize(&g.mc_dropout),
            })
        })
        .collect::<Result<_>>()?;
    Ok(DiagnosisTable { class_names: class_names.to_vec(), rows })
}

impl DiagnosisTable {
    pub fn non_dropout_hits(&self) -> usize {
        self.rows.iter().filter(|r| r.non_dropout.hit).count()
    }

    pub fn mc_dropout_hits(&self) -> usize {
        self.rows.iter().filter(|r| r.mc_dropout.hit).count()
    }

    fn names(&self, set: &[usize]) -> String {
        set.iter().map(|&l| self.class_names[l].as_str()).collect::<Vec<_>>().join(" ")
    }

    /// `condition,true_label,non_dropout,non_dropout_hit,mc_dropout,mc_dropout_hit`;
    /// sets are space-separated class names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,true_label,non_dropout,non_dropout_hit,mc_dropout,mc_dropout_hit\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.condition,
                self.class_names[r.true_label],
                self.names(&r.non_dropout.set),
                r.non_dropout.hit,
                self.names(&r.mc_dropout.set),
                r.mc_dropout.hit
            );
        }
        out
    }
}
