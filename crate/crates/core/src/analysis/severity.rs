//! Side-by-side outputs of a deterministic and an MC-dropout model across
//! fault severity levels, with condition-level diagnosis for the incipient
//! levels.

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::diagnosis::{diagnose_mc, diagnose_softmax, diagnosis_table, ConditionReports, DiagnosisTable, Thresholds};
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::mc::{group_by_condition, mc_predict_keyed, mean_class_summary, ConditionRow, PredictiveSummary};
use crate::network::NetworkParams;

/// Severity levels whose conditions enter the diagnosis table.
pub const DIAGNOSED_SEVERITIES: [u8; 2] = [1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityPanel {
    pub severity: u8,
    /// Deterministic-model softmax averages (variance identically zero).
    pub softmax: Vec<ConditionRow>,
    /// MC-dropout predictive means and variances.
    pub mc: Vec<ConditionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityGrid {
    pub class_names: Vec<String>,
    pub panels: Vec<SeverityPanel>,
    pub diagnosis: DiagnosisTable,
}

/// Deterministic outputs of `model` for every row, as zero-variance summaries.
pub fn point_predictions(model: &NetworkParams, data: &LabeledDataset) -> Result<Vec<PredictiveSummary>> {
    data.features.row_iter().map(|x| Ok(PredictiveSummary::point(model.predict(x)?))).collect()
}

/// `eval` holds the test conditions: fault rows at any severity, plus
/// optional fault-free rows which are shown in every panel. MC row `i` uses
/// `rng.substream(i)`.
pub fn severity_grid(
    m0: &NetworkParams,
    mp: &NetworkParams,
    eval: &LabeledDataset,
    samples: usize,
    rng: &RngStream,
    thresholds: &Thresholds,
) -> Result<SeverityGrid> {
    if m0.config.widths() != mp.config.widths() {
        return Err(Error::invalid("models must share an architecture"));
    }
    let ratio = thresholds.std_ratio.ok_or_else(|| Error::invalid("MC diagnosis needs a std-ratio threshold"))?;
    let keys: Vec<u64> = (0..eval.len() as u64).collect();
    let soft = point_predictions(m0, eval)?;
    let mc = mc_predict_keyed(mp, &eval.features, &keys, samples, rng)?;

    let mut severities: Vec<u8> = eval.severity.iter().copied().filter(|&s| s > 0).collect();
    severities.sort_unstable();
    severities.dedup();
    if severities.is_empty() {
        return Err(Error::invalid("evaluation data has no fault rows"));
    }

    let mut panels = Vec::new();
    for &sev in &severities {
        let idx: Vec<usize> = (0..eval.len()).filter(|&i| eval.severity[i] == sev || eval.severity[i] == 0).collect();
        let sub = eval.subset(&idx)?;
        let pick = |all: &[PredictiveSummary]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
        panels.push(SeverityPanel {
            severity: sev,
            softmax: mean_class_summary(&group_by_condition(&sub, &pick(&soft))?)?,
            mc: mean_class_summary(&group_by_condition(&sub, &pick(&mc))?)?,
        });
    }

    let mut groups = Vec::new();
    for ((sev, label), idx) in eval.conditions() {
        if !DIAGNOSED_SEVERITIES.contains(&sev) {
            continue;
        }
        let non_dropout = idx
            .iter()
            .map(|&i| Ok(diagnose_softmax(&soft[i].mean, thresholds.prob)?.with_true_label(label)))
            .collect::<Result<_>>()?;
        let mc_dropout = idx
            .iter()
            .map(|&i| Ok(diagnose_mc(&mc[i], thresholds.prob, ratio, thresholds.base)?.with_true_label(label)))
            .collect::<Result<_>>()?;
        groups.push(ConditionReports {
            condition: eval.condition_name(label, sev),
            true_label: label,
            non_dropout,
            mc_dropout,
        });
    }
    let diagnosis = diagnosis_table(&groups, &eval.class_names)?;
    Ok(SeverityGrid { class_names: eval.class_names.clone(), panels, diagnosis })
}

impl SeverityGrid {
    pub fn panel(&self, severity: u8) -> Option<&SeverityPanel> {
        self.panels.iter().find(|p| p.severity == severity)
    }
}
