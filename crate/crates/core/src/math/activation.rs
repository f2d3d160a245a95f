use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

#[inline]
pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

pub fn relu_vec(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(relu).collect()
}

/// Numerically safe softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.len() < 2 {
        return Err(Error::invalid(format!(
            "softmax needs at least 2 components, got {}",
            z.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input contains a non-finite value"));
    }
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Cross-entropy `-Σ target_i · ln(max(pred_i, 1e-12))` against a one-hot
/// target.
pub fn cross_entropy(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "prediction has {} classes, target has {}",
            pred.len(),
            target.len()
        )));
    }
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    let zeros = target.iter().filter(|&&t| t == 0.0).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::invalid("target is not one-hot"));
    }
    let total: f64 = pred.iter().sum();
    if (total - 1.0).abs() > 1e-9 || pred.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!(
            "prediction is not a probability vector (sum {total})"
        )));
    }
    let label = target.iter().position(|&t| t == 1.0).unwrap();
    Ok(cross_entropy_label(pred, label))
}

#[inline]
pub(crate) fn cross_entropy_label(pred: &[f64], label: usize) -> f64 {
    -pred[label].clamp(LOG_FLOOR, 1.0).ln()
}
