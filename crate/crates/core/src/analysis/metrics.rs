use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::PROB_FLOOR;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn rows<'a>(probs: &'a Tensor<f64>, labels: &[usize]) -> Result<(usize, std::slice::Chunks<'a, f64>)> {
    let &[n, c] = probs.shape() else {
        return Err(Error::dim(format!("expected [N, C] probabilities, got {:?}", probs.shape())));
    };
    if labels.len() != n {
        return Err(Error::data(format!("{n} predictions but {} labels", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::data(format!("label {bad} out of range for {c} classes")));
    }
    Ok((n, probs.data().chunks(c)))
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(probs: &Tensor<f64>, labels: &[usize]) -> Result<f64> {
    let (n, rows) = rows(probs, labels)?;
    let hits = rows.zip(labels).filter(|(r, &y)| argmax(r) == y).count();
    Ok(hits as f64 / n as f64)
}

/// Mean negative log-probability of the labels, clamped at `1e-12`.
pub fn nll(probs: &Tensor<f64>, labels: &[usize]) -> Result<f64> {
    let (n, rows) = rows(probs, labels)?;
    let total: f64 = rows.zip(labels).map(|(r, &y)| -r[y].max(PROB_FLOOR).ln()).sum();
    Ok(total / n as f64)
}
