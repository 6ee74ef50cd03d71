//! Deterministic synthetic image sets for tests and small experiments.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix_seed, rng_stream};
use crate::tensor::Tensor;

use super::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// A Gaussian bump whose position depends on the class.
    Blobs,
    /// Sinusoidal bars whose orientation depends on the class.
    Stripes,
    /// Uniform pixels, all labelled 0; meant as out-of-distribution input.
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub classes: usize,
    pub image_size: usize,
}

/// Generate `spec.n` single-channel square images. Sample `i` has label
/// `i % classes` (0 for noise) and draws from its own stream, so the output
/// depends only on `(spec, seed)`.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    let SynthSpec {
        kind,
        n,
        classes,
        image_size: s,
    } = *spec;
    if classes == 0 || n < classes {
        return Err(Error::config(format!(
            "synthetic data needs n ({n}) ≥ classes ({classes}) ≥ 1"
        )));
    }
    if s < 2 {
        return Err(Error::config(format!("image_size {s} is too small")));
    }
    let root = mix_seed(seed, kind as u64 + 0x5157);
    let sf = s as f64;
    let mid = (sf - 1.0) / 2.0;
    let mut data = Vec::with_capacity(n * s * s);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng_stream(root, i as u64, 0);
        let label = match kind {
            SynthKind::Noise => 0,
            _ => i % classes,
        };
        labels.push(label);
        match kind {
            SynthKind::Blobs => {
                let (cy, cx) = if classes == 1 {
                    (mid, mid)
                } else {
                    let a = TAU * label as f64 / classes as f64;
                    (mid + sf / 4.0 * a.sin(), mid + sf / 4.0 * a.cos())
                };
                let cy = cy + rng.next_f64() - 0.5;
                let cx = cx + rng.next_f64() - 0.5;
                let sigma = (sf / 8.0).max(0.75);
                for y in 0..s {
                    for x in 0..s {
                        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        let v = (-d2 / (2.0 * sigma * sigma)).exp() + 0.1 * rng.next_f64();
                        data.push(v.min(1.0) as f32);
                    }
                }
            }
            SynthKind::Stripes => {
                let theta = PI * label as f64 / classes as f64;
                let (st, ct) = theta.sin_cos();
                let period = (sf / 3.0).max(2.0);
                let phase = TAU * rng.next_f64();
                for y in 0..s {
                    for x in 0..s {
                        let proj = x as f64 * ct + y as f64 * st;
                        let v = 0.45 + 0.45 * (TAU * proj / period + phase).cos()
                            + 0.1 * rng.next_f64();
                        data.push(v.clamp(0.0, 1.0) as f32);
                    }
                }
            }
            SynthKind::Noise => {
                for _ in 0..s * s {
                    data.push(rng.next_f64() as f32);
                }
            }
        }
    }
    let images = Tensor::new(vec![n, 1, s, s], data)?;
    Dataset::new(images, labels, classes)
}
