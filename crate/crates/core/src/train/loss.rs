use crate::error::{Error, Result};
use crate::nn::LayerParams;
use crate::tensor::Scalar;

/// Probabilities are clamped to this value before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean negative log-likelihood of `labels` under the rows of `probs`
/// (`[B × C]`, row-major).
pub fn nll_term<T: Scalar>(probs: &[T], n_classes: usize, labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() * n_classes || labels.is_empty() {
        return Err(Error::dim(format!(
            "{} probabilities for {} labels × {n_classes} classes",
            probs.len(),
            labels.len()
        )));
    }
    let mut acc = 0.0;
    for (row, &y) in probs.chunks(n_classes).zip(labels) {
        if y >= n_classes {
            return Err(Error::data(format!("label {y} out of range for {n_classes} classes")));
        }
        acc += row[y].to_f64().max(PROB_FLOOR).ln();
    }
    Ok(-acc / labels.len() as f64)
}

/// `Σ ‖W‖²` over every weight tensor (biases excluded), times `weight_decay`.
pub fn weight_decay_term<T: Scalar>(params: &[LayerParams<T>], weight_decay: f64) -> f64 {
    if weight_decay == 0.0 {
        return 0.0;
    }
    let sq: f64 = params.iter().map(|p| p.weight.sum_squares().to_f64()).sum();
    weight_decay * sq
}

/// Monte Carlo training loss: batch NLL under the masked weights used in the
/// forward pass plus the L2 penalty on the unmasked weights.
pub fn loss_mc<T: Scalar>(
    probs: &[T],
    n_classes: usize,
    labels: &[usize],
    params: &[LayerParams<T>],
    weight_decay: f64,
) -> Result<f64> {
    Ok(nll_term(probs, n_classes, labels)? + weight_decay_term(params, weight_decay))
}
