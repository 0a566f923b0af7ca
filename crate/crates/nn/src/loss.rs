use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Softmax with the max subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross entropy of 1-D logits against a class index, with its gradient
/// `softmax(logits) - one_hot(label)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 1 {
        return Err(Error::Config(format!("logits must be 1-D, got shape {:?}", logits.shape())));
    }
    let z = logits.data();
    if label >= z.len() {
        return Err(Error::Domain(format!("label {label} out of range for {} classes", z.len())));
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let mut grad = softmax(z);
    grad[label] -= 1.0;
    Ok((lse - z[label], Tensor::from_vec(grad)))
}

/// Squared error and its derivative with respect to `pred`.
pub fn mse_loss(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d * d, 2.0 * d)
}
