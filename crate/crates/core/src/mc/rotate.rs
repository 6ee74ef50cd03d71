//! Rotation probe: predictive entropy as inputs are rotated away from the
//! training distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tensor::{Scalar, Tensor};

use super::{select_dc_predict, McConfig};

/// `(cos, sin)` with exact values at multiples of 90°.
fn exact_cos_sin(degrees: f64) -> (f64, f64) {
    let d = degrees.rem_euclid(360.0);
    match d {
        0.0 => (1.0, 0.0),
        90.0 => (0.0, 1.0),
        180.0 => (-1.0, 0.0),
        270.0 => (0.0, -1.0),
        _ => {
            let r = d.to_radians();
            (r.cos(), r.sin())
        }
    }
}

/// Rotate every channel of a `[C, H, W]` image counter-clockwise by
/// `degrees` about its centre, with nearest-neighbour sampling and zeros
/// where the source falls outside the image.
pub fn rotate_image<T: Scalar>(image: &Tensor<T>, degrees: f64) -> Result<Tensor<T>> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::dim(format!("rotation needs a C×H×W image, got {:?}", image.shape())));
    };
    if !degrees.is_finite() {
        return Err(Error::config(format!("rotation angle {degrees} is not finite")));
    }
    let (cos, sin) = exact_cos_sin(degrees);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let src = image.data();
    let mut out = vec![T::zero(); src.len()];
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            // Inverse map: rotate the output coordinate clockwise.
            let sx = (cos * dx - sin * dy + cx).round();
            let sy = (sin * dx + cos * dy + cy).round();
            if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            for ch in 0..c {
                out[(ch * h + y) * w + x] = src[(ch * h + sy) * w + sx];
            }
        }
    }
    Ok(Tensor::from_parts(vec![c, h, w], out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationPoint {
    pub angle: f64,
    pub mean_entropy: f64,
    pub std_entropy: f64,
    /// Fraction of rotated images still assigned their original label, when
    /// labels were supplied.
    pub accuracy: Option<f64>,
}

/// Rotate `images` (`[N, C, H, W]`) by each angle and run Select-DC on the
/// result. `angles` must include 0.
pub fn rotation_entropy_sweep(
    net: &Network<f32>,
    images: &Tensor<f32>,
    labels: Option<&[usize]>,
    angles: &[f64],
    cfg: &McConfig,
) -> Result<Vec<RotationPoint>> {
    if !angles.contains(&0.0) {
        return Err(Error::config("rotation angles must include 0"));
    }
    let shape = images.shape();
    if shape.len() != 4 {
        return Err(Error::data(format!("expected [N, C, H, W] images, got {shape:?}")));
    }
    let n = shape[0];
    let per: usize = shape[1..].iter().product();
    let mut points = Vec::with_capacity(angles.len());
    for &angle in angles {
        let mut rotated = Vec::with_capacity(images.len());
        for i in 0..n {
            let img = Tensor::from_parts(shape[1..].to_vec(), images.data()[i * per..(i + 1) * per].to_vec());
            rotated.extend(rotate_image(&img, angle)?.into_data());
        }
        let batch = Tensor::from_parts(shape.to_vec(), rotated);
        let s = select_dc_predict(net, &batch, cfg)?;
        let mean = s.mean_entropy();
        let var = s.entropy.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        let accuracy = labels.map(|l| crate::analysis::accuracy(&s.mean_probs, l)).transpose()?;
        points.push(RotationPoint {
            angle,
            mean_entropy: mean,
            std_entropy: var.sqrt(),
            accuracy,
        });
    }
    Ok(points)
}
