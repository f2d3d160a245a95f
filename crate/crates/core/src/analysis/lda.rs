//! Fisher linear discriminant projection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::eigen::MAX_EIGEN_DIM;
use crate::math::{symmetric_generalized_eig, Matrix};

pub const DEFAULT_LDA_COMPONENTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjection {
    /// `d × k`; columns are Sw-orthonormal discriminant directions.
    pub projection: Matrix,
    pub eigenvalues: Vec<f64>,
    /// Labels present in the fitted data, ascending.
    pub class_labels: Vec<usize>,
    /// Projected class means, one row per entry of `class_labels`.
    pub class_means: Matrix,
    /// sha256 of the fitted features and labels.
    pub fingerprint: String,
}

/// sha256 over the little-endian feature bytes followed by the labels.
pub fn dataset_fingerprint(data: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    for v in data.features.as_slice() {
        h.update(v.to_le_bytes());
    }
    for &y in &data.labels {
        h.update((y as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Within- and between-class scatter matrices.
pub fn scatter_matrices(features: &Matrix, labels: &[usize]) -> Result<(Matrix, Matrix)> {
    if features.rows() != labels.len() {
        return Err(Error::dim("one label per row required"));
    }
    let d = features.cols();
    let groups = group_rows(labels);
    let overall = mean_of(features, &(0..features.rows()).collect::<Vec<_>>());
    let mut sw = Matrix::zeros(d, d);
    let mut sb = Matrix::zeros(d, d);
    for idx in groups.values() {
        let mu = mean_of(features, idx);
        for &i in idx {
            let x = features.row(i);
            for a in 0..d {
                let da = x[a] - mu[a];
                for b in 0..d {
                    sw[(a, b)] += da * (x[b] - mu[b]);
                }
            }
        }
        let n = idx.len() as f64;
        for a in 0..d {
            for b in 0..d {
                sb[(a, b)] += n * (mu[a] - overall[a]) * (mu[b] - overall[b]);
            }
        }
    }
    Ok((sw, sb))
}

fn group_rows(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut g: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        g.entry(y).or_default().push(i);
    }
    g
}

fn mean_of(m: &Matrix, idx: &[usize]) -> Vec<f64> {
    let mut mu = vec![0.0; m.cols()];
    for &i in idx {
        for (a, v) in mu.iter_mut().zip(m.row(i)) {
            *a += v;
        }
    }
    mu.iter_mut().for_each(|a| *a /= idx.len() as f64);
    mu
}

/// Fits the top-`k` discriminant directions of `S_b v = λ S_w v`.
/// `k` may not exceed one less than the number of classes present.
pub fn lda_fit(data: &LabeledDataset, k: usize) -> Result<LdaProjection> {
    let d = data.num_features();
    if d > MAX_EIGEN_DIM {
        return Err(Error::invalid(format!("LDA supports at most {MAX_EIGEN_DIM} features, got {d}")));
    }
    let groups = group_rows(&data.labels);
    if groups.len() < 2 {
        return Err(Error::invalid("LDA needs at least two classes"));
    }
    if let Some((y, idx)) = groups.iter().find(|(_, idx)| idx.len() < 2) {
        return Err(Error::invalid(format!("class {y} has {} row(s); at least 2 required", idx.len())));
    }
    if k == 0 || k > groups.len() - 1 || k > d {
        return Err(Error::invalid(format!(
            "k = {k} components requested; {} classes and {d} features allow 1..={}",
            groups.len(),
            (groups.len() - 1).min(d)
        )));
    }
    let (sw, sb) = scatter_matrices(&data.features, &data.labels)?;
    let eig = symmetric_generalized_eig(&sb, &sw)?;
    let mut projection = Matrix::zeros(d, k);
    for r in 0..d {
        for c in 0..k {
            projection[(r, c)] = eig.vectors[(r, c)];
        }
    }
    let projected = data.features.matmul(&projection)?;
    let mut class_means = Matrix::zeros(groups.len(), k);
    for (row, idx) in groups.values().enumerate() {
        class_means.row_mut(row).copy_from_slice(&mean_of(&projected, idx));
    }
    Ok(LdaProjection {
        projection,
        eigenvalues: eig.values[..k].to_vec(),
        class_labels: groups.keys().copied().collect(),
        class_means,
        fingerprint: dataset_fingerprint(data),
    })
}

/// Projects the rows of `x` (`n × d`) to `n × k`.
pub fn lda_transform(proj: &LdaProjection, x: &Matrix) -> Result<Matrix> {
    x.matmul(&proj.projection)
}

/// Projected centroid of every `(severity, label)` condition in `data`.
pub fn condition_centroids(proj: &LdaProjection, data: &LabeledDataset) -> Result<Vec<(String, Vec<f64>)>> {
    let projected = lda_transform(proj, &data.features)?;
    Ok(data
        .conditions()
        .into_iter()
        .map(|((sev, label), idx)| (data.condition_name(label, sev), mean_of(&projected, &idx)))
        .collect())
}

impl LdaProjection {
    pub fn components(&self) -> usize {
        self.projection.cols()
    }

    /// `x,y,…` projected coordinates with condition names, one row per sample.
    pub fn projected_csv(&self, data: &LabeledDataset) -> Result<String> {
        let projected = lda_transform(self, &data.features)?;
        let mut out = String::new();
        for c in 0..self.components() {
            out.push_str(&format!("ld{},", c + 1));
        }
        out.push_str("condition\n");
        for i in 0..data.len() {
            for v in projected.row(i) {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&data.condition_name(data.labels[i], data.severity[i]));
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngStream;

    fn gaussians(means: &[[f64; 3]], n: usize, sigma: f64, seed: u64) -> LabeledDataset {
        let mut rng = RngStream::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, mu) in means.iter().enumerate() {
            for _ in 0..n {
                rows.push(mu.iter().map(|m| m + sigma * rng.standard_normal()).collect::<Vec<_>>());
                labels.push(c);
            }
        }
        let severity = labels.iter().map(|&y| if y == 0 { 0 } else { 4 }).collect();
        let classes = (0..means.len()).map(|c| format!("C{c}")).collect();
        LabeledDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            labels,
            severity,
            vec!["a".into(), "b".into(), "c".into()],
            classes,
        )
        .unwrap()
    }

    #[test]
    fn projected_training_means_match_stored_means() {
        let data = gaussians(&[[0.0, 0.0, 0.0], [2.0, 0.0, 1.0], [0.0, 3.0, -1.0]], 50, 0.7, 3);
        let proj = lda_fit(&data, 2).unwrap();
        let centroids = condition_centroids(&proj, &data).unwrap();
        for (row, (_, c)) in centroids.iter().enumerate() {
            for (a, b) in c.iter().zip(proj.class_means.row(row)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(proj.eigenvalues[0] >= proj.eigenvalues[1]);
    }

    #[test]
    fn columns_are_within_scatter_orthonormal() {
        let data = gaussians(&[[0.0, 0.0, 0.0], [2.0, 0.0, 1.0], [0.0, 3.0, -1.0]], 40, 1.0, 5);
        let proj = lda_fit(&data, 2).unwrap();
        let (sw, _) = scatter_matrices(&data.features, &data.labels).unwrap();
        let g = proj.projection.transpose().matmul(&sw).unwrap().matmul(&proj.projection).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let two = gaussians(&[[0.0; 3], [1.0, 0.0, 0.0]], 10, 1.0, 1);
        assert!(lda_fit(&two, 2).is_err());
        assert!(lda_fit(&two, 0).is_err());
        assert!(lda_fit(&two, 1).is_ok());
        let lonely = two.subset(&[0, 1, 10]).unwrap();
        assert!(lda_fit(&lonely, 1).is_err());
        let one_class = two.subset(&[0, 1, 2]).unwrap();
        assert!(lda_fit(&one_class, 1).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = gaussians(&[[0.0; 3], [1.0, 0.0, 0.0]], 10, 1.0, 1);
        let b = gaussians(&[[0.0; 3], [1.0, 0.0, 0.0]], 10, 1.0, 2);
        assert_eq!(dataset_fingerprint(&a), dataset_fingerprint(&a.clone()));
        assert_ne!(dataset_fingerprint(&a), dataset_fingerprint(&b));
        assert_eq!(dataset_fingerprint(&a).len(), 64);
    }
}
