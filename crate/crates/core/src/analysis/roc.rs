use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One operating point: inputs scoring at least `threshold` are flagged as
/// out-of-distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

fn check(id: &[f64], ood: &[f64]) -> Result<()> {
    if id.is_empty() || ood.is_empty() {
        return Err(Error::data("AUROC needs at least one in- and one out-of-distribution score"));
    }
    if id.iter().chain(ood).any(|v| v.is_nan()) {
        return Err(Error::data("AUROC scores contain NaN"));
    }
    Ok(())
}

/// Area under the ROC curve with OOD as the positive class: the probability
/// that an OOD score exceeds an ID score, ties counting one half.
pub fn auroc(id: &[f64], ood: &[f64]) -> Result<f64> {
    check(id, ood)?;
    let mut sorted = id.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut twice_wins = 0u128;
    for &s in ood {
        let below = sorted.partition_point(|&v| v < s);
        let not_above = sorted.partition_point(|&v| v <= s);
        twice_wins += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(twice_wins as f64 / (2.0 * id.len() as f64 * ood.len() as f64))
}

/// ROC curve swept over every distinct score, from the empty detector
/// `(0, 0)` to the detector that flags everything `(1, 1)`.
pub fn roc_curve(id: &[f64], ood: &[f64]) -> Result<Vec<RocPoint>> {
    check(id, ood)?;
    let mut scored: Vec<(f64, bool)> = id
        .iter()
        .map(|&s| (s, false))
        .chain(ood.iter().map(|&s| (s, true)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (ood.len() as f64, id.len() as f64);
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / np,
            fpr: fp as f64 / nn,
        });
    }
    Ok(curve)
}

/// Trapezoidal area under a curve ordered by increasing FPR.
pub fn trapezoid_area(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}
