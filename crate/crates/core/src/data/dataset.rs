use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Name of the fault-free class. It always sits at class index 0.
pub const NORMAL_CLASS: &str = "NM";

pub const MAX_SEVERITY: u8 = 4;

/// Per-feature affine normalization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Fits population mean and standard deviation per column. Constant
    /// columns get `std = 1` so they pass through centered.
    pub fn fit(features: &Matrix) -> Self {
        let n = features.rows() as f64;
        let d = features.cols();
        let mut mean = vec![0.0; d];
        for row in features.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in features.row_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::dim(format!(
                "standardization fitted on {} features, data has {}",
                self.mean.len(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            let z = self.apply_row(features.row(r));
            out.row_mut(r).copy_from_slice(&z);
        }
        Ok(out)
    }
}

/// Features with class labels and severity tags.
///
/// Severity 0 marks fault-free rows and coincides with class 0; 1–4 are the
/// graded fault levels, slightest to severest.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub severity: Vec<u8>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub standardization: Option<Standardization>,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        severity: Vec<u8>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            severity,
            feature_names,
            class_names,
            standardization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n || self.severity.len() != n {
            return Err(Error::dim("labels and severity must have one entry per row"));
        }
        if self.feature_names.len() != self.features.cols() {
            return Err(Error::dim("one feature name per column required"));
        }
        if self.class_names.len() < 2 {
            return Err(Error::invalid("at least two classes required"));
        }
        for (i, (&y, &s)) in self.labels.iter().zip(&self.severity).enumerate() {
            if y >= self.class_names.len() {
                return Err(Error::invalid(format!("row {i}: label {y} out of range")));
            }
            if s > MAX_SEVERITY {
                return Err(Error::invalid(format!("row {i}: severity {s} out of range")));
            }
            if (s == 0) != (y == 0) {
                return Err(Error::invalid(format!(
                    "row {i}: severity 0 must coincide with the fault-free class (label {y}, severity {s})"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// Rows in the given order; metadata is carried over.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::EmptyPartition("subset selects no rows".into()));
        }
        Ok(Self {
            features: self.features.select_rows(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            severity: idx.iter().map(|&i| self.severity[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            standardization: self.standardization.clone(),
        })
    }

    pub fn filter_severity(&self, keep: &[u8]) -> Result<Self> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.severity[i]))
            .collect();
        if idx.is_empty() {
            return Err(Error::EmptyPartition(format!("no rows with severity in {keep:?}")));
        }
        self.subset(&idx)
    }

    /// Fits a standardization on this data and applies it.
    pub fn standardize(&self) -> Result<Self> {
        let stats = Standardization::fit(&self.features);
        self.apply_standardization(&stats)
    }

    /// Applies statistics fitted elsewhere (typically the training split).
    pub fn apply_standardization(&self, stats: &Standardization) -> Result<Self> {
        Ok(Self {
            features: stats.apply(&self.features)?,
            standardization: Some(stats.clone()),
            ..self.clone()
        })
    }

    /// Display name of a (label, severity) condition, e.g. `NM` or `RL-SL2`.
    pub fn condition_name(&self, label: usize, severity: u8) -> String {
        if severity == 0 {
            self.class_names[label].clone()
        } else {
            format!("{}-SL{}", self.class_names[label], severity)
        }
    }

    /// Row indices grouped by `(severity, label)`.
    pub fn conditions(&self) -> BTreeMap<(u8, usize), Vec<usize>> {
        let mut out: BTreeMap<(u8, usize), Vec<usize>> = BTreeMap::new();
        for i in 0..self.len() {
            out.entry((self.severity[i], self.labels[i])).or_default().push(i);
        }
        out
    }

    pub fn metadata(&self) -> DatasetMetadata {
        DatasetMetadata {
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            standardization: self.standardization.clone(),
        }
    }
}

/// JSON sidecar stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMetadata {
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub standardization: Option<Standardization>,
}

/// Partitions rows by severity tag. Rows whose severity is in neither set
/// are dropped.
pub fn split_by_severity(
    data: &LabeledDataset,
    train_severities: &[u8],
    test_severities: &[u8],
) -> Result<(LabeledDataset, LabeledDataset)> {
    let train: BTreeSet<u8> = train_severities.iter().copied().collect();
    let test: BTreeSet<u8> = test_severities.iter().copied().collect();
    if let Some(s) = train.intersection(&test).next() {
        return Err(Error::invalid(format!(
            "severity {s} appears in both train and test sets"
        )));
    }
    let train_idx: Vec<usize> = (0..data.len()).filter(|&i| train.contains(&data.severity[i])).collect();
    let test_idx: Vec<usize> = (0..data.len()).filter(|&i| test.contains(&data.severity[i])).collect();
    if train_idx.is_empty() {
        return Err(Error::EmptyPartition(format!("train split {train:?} is empty")));
    }
    if test_idx.is_empty() {
        return Err(Error::EmptyPartition(format!("test split {test:?} is empty")));
    }
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}
