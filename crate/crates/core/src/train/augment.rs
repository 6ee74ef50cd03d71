use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Scalar, Tensor};

fn chw<T: Scalar>(image: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::dim(format!("expected a C×H×W image, got {s:?}"))),
    }
}

/// Translate by `(dx, dy)` pixels (positive = right / down), zero-filling
/// the exposed border.
pub fn shift_image<T: Scalar>(image: &Tensor<T>, dx: i64, dy: i64) -> Result<Tensor<T>> {
    let (c, h, w) = chw(image)?;
    let src = image.data();
    let mut out = vec![T::zero(); src.len()];
    for ch in 0..c {
        for y in 0..h as i64 {
            let sy = y - dy;
            if sy < 0 || sy >= h as i64 {
                continue;
            }
            for x in 0..w as i64 {
                let sx = x - dx;
                if sx >= 0 && sx < w as i64 {
                    out[(ch * h + y as usize) * w + x as usize] =
                        src[(ch * h + sy as usize) * w + sx as usize];
                }
            }
        }
    }
    Ok(Tensor::from_parts(image.shape().to_vec(), out))
}

pub fn flip_horizontal<T: Scalar>(image: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, _, w) = chw(image)?;
    let mut out = image.data().to_vec();
    for row in out.chunks_mut(w) {
        row.reverse();
    }
    Ok(Tensor::from_parts(image.shape().to_vec(), out))
}

/// Random shift in `[−shift_max, shift_max]²` followed by a horizontal flip
/// with probability `flip_prob`. Draw order: dx, dy, flip.
pub fn augment<T: Scalar>(
    image: &Tensor<T>,
    shift_max: usize,
    flip_prob: f64,
    stream: &mut RngStream,
) -> Result<Tensor<T>> {
    let (_, h, w) = chw(image)?;
    if shift_max >= h.min(w) {
        return Err(Error::config(format!(
            "shift_max {shift_max} must be smaller than the image side {}",
            h.min(w)
        )));
    }
    let s = shift_max as i64;
    let dx = stream.range_inclusive(-s, s);
    let dy = stream.range_inclusive(-s, s);
    let flip = stream.next_f64() < flip_prob;
    let shifted = shift_image(image, dx, dy)?;
    if flip {
        flip_horizontal(&shifted)
    } else {
        Ok(shifted)
    }
}
