//! Statistical and invariance properties checked against independent
//! computations.

use mcfdd::analysis::{lda_fit, lda_transform, scatter_matrices};
use mcfdd::data::LabeledDataset;
use mcfdd::math::{Matrix, RngStream};
use mcfdd::mc::mc_predict;
use mcfdd::network::{NetworkConfig, NetworkParams};
use proptest::prelude::*;

fn spread(net: &NetworkParams, x: &[f64], samples: usize, base: u64) -> Vec<f64> {
    let reps: Vec<Vec<f64>> = (0..50)
        .map(|r| mc_predict(net, x, samples, &mut RngStream::with_stream(base, r)).unwrap().mean)
        .collect();
    (0..net.config.num_classes)
        .map(|k| {
            let m = reps.iter().map(|v| v[k]).sum::<f64>() / reps.len() as f64;
            (reps.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
        })
        .collect()
}

#[test]
fn quadrupling_samples_halves_the_spread() {
    let cfg = NetworkConfig::new(3).with_hidden(&[10, 10]).with_classes(4).with_dropout(0.2).with_seed(9);
    let net = NetworkParams::init(&cfg).unwrap();
    let x = [0.4, -1.2, 0.9];
    let small = spread(&net, &x, 100, 1);
    let large = spread(&net, &x, 400, 2);
    for (k, (s, l)) in small.iter().zip(&large).enumerate() {
        assert!(l / s <= 0.75, "class {k}: {l} / {s}");
    }
}

fn blobs(centers: &[Vec<f64>], per_class: usize, seed: u64) -> LabeledDataset {
    let d = centers[0].len();
    let mut rng = RngStream::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, mu) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(mu.iter().map(|m| m + rng.standard_normal()).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    let severity = labels.iter().map(|&y| if y == 0 { 0 } else { 4 }).collect();
    LabeledDataset::new(
        Matrix::from_rows(&rows).unwrap(),
        labels,
        severity,
        (0..d).map(|j| format!("x{j}")).collect(),
        (0..centers.len()).map(|c| format!("C{c}")).collect(),
    )
    .unwrap()
}

fn transformed(data: &LabeledDataset, a: &Matrix, b: &[f64]) -> LabeledDataset {
    let rows: Vec<Vec<f64>> = data
        .features
        .row_iter()
        .map(|x| a.matvec(x).unwrap().iter().zip(b).map(|(v, s)| v + s).collect())
        .collect();
    LabeledDataset { features: Matrix::from_rows(&rows).unwrap(), ..data.clone() }
}

fn projected_mean_distances(data: &LabeledDataset, k: usize) -> Vec<f64> {
    let proj = lda_fit(data, k).unwrap();
    let z = lda_transform(&proj, &data.features).unwrap();
    let c = data.num_classes();
    let means: Vec<Vec<f64>> = (0..c)
        .map(|cls| {
            let idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == cls).collect();
            (0..k).map(|j| idx.iter().map(|&i| z.row(i)[j]).sum::<f64>() / idx.len() as f64).collect()
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..c {
        for j in i + 1..c {
            out.push(means[i].iter().zip(&means[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
    }
    out
}

/// tr(Sw⁻¹ Sb) for 2-D data.
fn separability(features: &Matrix, labels: &[usize]) -> f64 {
    let (sw, sb) = scatter_matrices(features, labels).unwrap();
    let (a, b, c, d) = (sw.row(0)[0], sw.row(0)[1], sw.row(1)[0], sw.row(1)[1]);
    let det = a * d - b * c;
    let inv = [d / det, -b / det, -c / det, a / det];
    inv[0] * sb.row(0)[0] + inv[1] * sb.row(1)[0] + inv[2] * sb.row(0)[1] + inv[3] * sb.row(1)[1]
}

#[test]
fn full_rank_projection_keeps_separability() {
    let data = blobs(&[vec![0.0, 0.0], vec![2.0, 0.5], vec![-1.0, 2.5]], 80, 3);
    let proj = lda_fit(&data, 2).unwrap();
    let z = lda_transform(&proj, &data.features).unwrap();
    let before = separability(&data.features, &data.labels);
    let after = separability(&z, &data.labels);
    assert!((before - after).abs() <= 1e-9 * before.max(1.0), "{before} vs {after}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lda_is_affine_invariant(
        noise in proptest::collection::vec(-0.2f64..0.2, 16),
        shift in proptest::collection::vec(-5.0f64..5.0, 4),
        seed in 0u64..1000,
    ) {
        let centers = vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![3.0, 1.0, 0.0, -1.0],
            vec![-1.0, 2.5, 1.0, 0.5],
            vec![0.5, -2.0, 2.0, 1.5],
        ];
        let data = blobs(&centers, 40, seed);
        // diagonally dominant, hence invertible
        let a = Matrix::new(4, 4, noise).unwrap().add(&Matrix::identity(4)).unwrap();
        let moved = transformed(&data, &a, &shift);
        let before = projected_mean_distances(&data, 2);
        let after = projected_mean_distances(&moved, 2);
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}
