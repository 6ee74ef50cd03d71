//! Dense row-major tensors and the numeric kernels used by the network.
//!
//! Every reduction runs in a fixed order (ascending inner index), so calling a
//! kernel twice on the same input yields bit-identical output. Kernels are
//! generic over [`Scalar`]; `f32` is the working precision and `f64` is used
//! for gradient checking.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;

use crate::error::{Error, Result};

pub trait Scalar:
    Float + Debug + Default + AddAssign + MulAssign + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} holds {n} elements but {} were given",
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.ensure_finite("tensor construction")?;
        Ok(t)
    }

    /// Constructor for internal callers that already guarantee the invariants.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn from_f64_slice(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), values.iter().map(|&v| T::from_f64(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Leading-axis slice `[start, end)` of a tensor whose first axis is a
    /// batch dimension.
    pub fn slice_outer(&self, start: usize, end: usize) -> Result<Self> {
        let outer = *self.shape.first().ok_or_else(|| Error::dim("rank-0 tensor"))?;
        if start >= end || end > outer {
            return Err(Error::dim(format!("slice {start}..{end} of outer size {outer}")));
        }
        let inner: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Ok(Tensor {
            shape,
            data: self.data[start * inner..end * inner].to_vec(),
        })
    }

    /// Gather rows of the leading axis.
    pub fn gather_outer(&self, indices: &[usize]) -> Result<Self> {
        let outer = self.shape[0];
        let inner: usize = self.shape[1..].iter().product();
        let mut data = Vec::with_capacity(indices.len() * inner);
        for &i in indices {
            if i >= outer {
                return Err(Error::dim(format!("row {i} out of range {outer}")));
            }
            data.extend_from_slice(&self.data[i * inner..(i + 1) * inner]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        check_shape(&shape)?;
        Ok(Tensor { shape, data })
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "{context}: non-finite value {:?} at flat index {i}",
                self.data[i]
            ))),
        }
    }

    pub fn sum_squares(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v * v;
        }
        acc
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::dim(format!(
            "shape {shape:?} must be non-empty with positive dimensions"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// GEMM variants. All accumulate over the shared index in ascending order.

/// `c[m×n] = a[m×k] · b[k×n]`.
pub(crate) fn gemm<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.fill(T::zero());
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×n] += aᵀ · b` with `a` stored as `[k×m]` and `b` as `[k×n]`.
pub(crate) fn gemm_at_b_acc<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    b: &[T],
    c: &mut [T],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &av) in a_row.iter().enumerate() {
            let row = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×n] = a · bᵀ` with `a` stored as `[m×k]` and `b` as `[n×k]`.
pub(crate) fn gemm_a_bt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * n + j] = acc;
        }
    }
}

/// Standard matrix product of two rank-2 tensors.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = as_matrix(a)?;
    let (k2, n) = as_matrix(b)?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner dimensions differ: {:?} · {:?}",
            a.shape, b.shape
        )));
    }
    let mut out = vec![T::zero(); m * n];
    gemm(m, k, n, &a.data, &b.data, &mut out);
    let t = Tensor::from_parts(vec![m, n], out);
    t.ensure_finite("matmul")?;
    Ok(t)
}

fn as_matrix<T>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape.as_slice() {
        &[r, c] => Ok((r, c)),
        s => Err(Error::dim(format!("expected a matrix, got shape {s:?}"))),
    }
}

// ---------------------------------------------------------------------------
// Convolution via im2col.

/// Geometry of one 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn output_hw(&self) -> Result<(usize, usize)> {
        Ok((
            conv_out_dim(self.height, self.kernel_h, self.stride, self.pad)?,
            conv_out_dim(self.width, self.kernel_w, self.stride, self.pad)?,
        ))
    }

    pub(crate) fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }
}

pub fn conv_out_dim(size: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::dim("convolution stride must be positive"));
    }
    let padded = size + 2 * pad;
    if kernel == 0 || padded < kernel || (padded - kernel) % stride != 0 {
        return Err(Error::dim(format!(
            "({size} + 2·{pad} − {kernel}) / {stride} + 1 is not a positive integer"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Unfold one `[C×H×W]` image into columns `[C·kh·kw × H'·W']`.
pub(crate) fn im2col<T: Scalar>(g: &ConvGeometry, oh: usize, ow: usize, img: &[T], cols: &mut [T]) {
    let npos = oh * ow;
    debug_assert_eq!(cols.len(), g.patch_len() * npos);
    let (h, w) = (g.height as isize, g.width as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let dst = &mut cols[row * npos..(row + 1) * npos];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        dst[oy * ow + ox] = if iy >= 0 && iy < h && ix >= 0 && ix < w {
                            plane[(iy * w + ix) as usize]
                        } else {
                            T::zero()
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Fold columns back onto an image, accumulating overlaps (adjoint of im2col).
pub(crate) fn col2im<T: Scalar>(g: &ConvGeometry, oh: usize, ow: usize, cols: &[T], img: &mut [T]) {
    let npos = oh * ow;
    let (h, w) = (g.height as isize, g.width as isize);
    let mut row = 0;
    for c in 0..g.in_channels {
        let plane = &mut img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let src = &cols[row * npos..(row + 1) * npos];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < w {
                            plane[(iy * w + ix) as usize] += src[oy * ow + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Batched cross-correlation without bias. `input` is `[B×C×H×W]` flat,
/// `kernels` is `[O×C×kh×kw]` flat; returns `[B×O×H'×W']` flat.
pub(crate) fn conv2d_batch<T: Scalar>(
    g: &ConvGeometry,
    out_channels: usize,
    batch: usize,
    input: &[T],
    kernels: &[T],
) -> Result<Vec<T>> {
    let (oh, ow) = g.output_hw()?;
    let npos = oh * ow;
    let in_len = g.in_channels * g.height * g.width;
    let out_len = out_channels * npos;
    let mut cols = vec![T::zero(); g.patch_len() * npos];
    let mut out = vec![T::zero(); batch * out_len];
    for b in 0..batch {
        im2col(g, oh, ow, &input[b * in_len..(b + 1) * in_len], &mut cols);
        gemm(
            out_channels,
            g.patch_len(),
            npos,
            kernels,
            &cols,
            &mut out[b * out_len..(b + 1) * out_len],
        );
    }
    Ok(out)
}

/// Single-image 2-D cross-correlation with zero padding (no kernel flip).
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let &[c, h, w] = input.shape.as_slice() else {
        return Err(Error::dim(format!("conv2d input must be C×H×W, got {:?}", input.shape)));
    };
    let &[o, kc, kh, kw] = kernels.shape.as_slice() else {
        return Err(Error::dim(format!(
            "conv2d kernels must be O×C×kh×kw, got {:?}",
            kernels.shape
        )));
    };
    if kc != c {
        return Err(Error::dim(format!("kernel expects {kc} channels, input has {c}")));
    }
    let g = ConvGeometry {
        in_channels: c,
        height: h,
        width: w,
        kernel_h: kh,
        kernel_w: kw,
        stride,
        pad,
    };
    let (oh, ow) = g.output_hw()?;
    let out = conv2d_batch(&g, o, 1, &input.data, &kernels.data)?;
    let t = Tensor::from_parts(vec![o, oh, ow], out);
    t.ensure_finite("conv2d")?;
    Ok(t)
}

// ---------------------------------------------------------------------------
// Softmax, relu, pooling.

/// Numerically stable softmax of a slice, written into `out`.
pub(crate) fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    let mut max = T::neg_infinity();
    for &v in logits {
        if v > max {
            max = v;
        }
    }
    let mut sum = T::zero();
    for (o, &v) in out.iter_mut().zip(logits) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    let tiny = T::min_positive_value();
    for o in out.iter_mut() {
        *o = (*o / sum).max(tiny);
    }
}

pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.shape.len() != 1 {
        return Err(Error::dim(format!("softmax expects a vector, got {:?}", logits.shape)));
    }
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax of non-finite logits".into()));
    }
    let mut out = vec![T::zero(); logits.len()];
    softmax_into(&logits.data, &mut out);
    Ok(Tensor::from_parts(logits.shape.clone(), out))
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor::from_parts(
        x.shape.clone(),
        x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
    )
}

/// 2×2 max pooling with stride 2 over `[B×C×H×W]`; odd trailing rows/columns
/// are dropped. Returns the pooled values and the flat input index of each
/// maximum (first maximum in row-major window order wins ties).
pub(crate) fn maxpool2_batch<T: Scalar>(
    planes: usize,
    h: usize,
    w: usize,
    input: &[T],
) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_i = base + 2 * oy * w + 2 * ox;
                let mut best = input[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if input[i] > best {
                        best = input[i];
                        best_i = i;
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f32> {
        Tensor::from_f64_slice(shape, v).unwrap()
    }

    #[test]
    fn matmul_identity_zero_and_hand_case() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(matmul(&a, &Tensor::identity(2)).unwrap(), a);
        let z = matmul(&a, &Tensor::zeros(&[2, 2])).unwrap();
        assert_eq!(z.data(), &[0.0; 4]);
        let r = matmul(&t(&[1, 2], &[1., 2.]), &t(&[2, 1], &[3., 5.])).unwrap();
        assert_eq!(r.shape(), &[1, 1]);
        assert_eq!(r.data(), &[13.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = t(&[2, 3], &[0.; 6]);
        assert!(matches!(matmul(&a, &a), Err(Error::Dimension(_))));
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.11).cos()).collect();
        let at = Tensor::<f64>::from_f64_slice(&[3, 4], &a).unwrap();
        let bt = Tensor::<f64>::from_f64_slice(&[4, 5], &b).unwrap();
        let c = matmul(&at, &bt).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut s = 0.0;
                for p in 0..4 {
                    s += a[i * 4 + p] * b[p * 5 + j];
                }
                assert_eq!(c.data()[i * 5 + j], s);
            }
        }
    }

    #[test]
    fn transposed_gemms_agree_with_plain_gemm() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut want = vec![0.0; m * n];
        gemm(m, k, n, &a, &b, &mut want);

        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut got = vec![0.0; m * n];
        gemm_at_b_acc(m, k, n, &at, &b, &mut got);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        gemm_a_bt(m, k, n, &a, &bt, &mut got);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_unit_kernel_is_identity() {
        let x = t(&[2, 3, 3], &(0..18).map(|i| i as f64 * 0.5 - 3.0).collect::<Vec<_>>());
        // two output channels, each picking one input channel
        let k = t(&[2, 2, 1, 1], &[1., 0., 0., 1.]);
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn conv_zero_kernel_and_sum_of_ones() {
        let x = t(&[1, 3, 3], &[1.; 9]);
        let z = conv2d(&x, &Tensor::zeros(&[1, 1, 3, 3]), 1, 0).unwrap();
        assert_eq!(z.data(), &[0.0]);
        let s = conv2d(&x, &t(&[1, 1, 3, 3], &[1.; 9]), 1, 0).unwrap();
        assert_eq!(s.shape(), &[1, 1, 1]);
        assert_eq!(s.data(), &[9.0]);
    }

    #[test]
    fn conv_matches_direct_loop_with_padding_and_stride() {
        let (c, h, w, o, kh, kw, stride, pad) = (2, 5, 6, 3, 3, 2, 2, 1);
        let x: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.13).sin()).collect();
        let k: Vec<f64> = (0..o * c * kh * kw).map(|i| (i as f64 * 0.29).cos()).collect();
        let xt = Tensor::<f64>::from_f64_slice(&[c, h, w], &x).unwrap();
        let kt = Tensor::<f64>::from_f64_slice(&[o, c, kh, kw], &k).unwrap();
        let y = conv2d(&xt, &kt, stride, pad).unwrap();
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        assert_eq!(y.shape(), &[o, oh, ow]);
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = 0.0;
                    for ic in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (oy * stride + i) as isize - pad as isize;
                                let ix = (ox * stride + j) as isize - pad as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    s += x[ic * h * w + iy as usize * w + ix as usize]
                                        * k[((oc * c + ic) * kh + i) * kw + j];
                                }
                            }
                        }
                    }
                    let got = y.data()[(oc * oh + oy) * ow + ox];
                    assert!((got - s).abs() < 1e-12, "{got} vs {s}");
                }
            }
        }
    }

    #[test]
    fn conv_rejects_non_integral_output() {
        let x = t(&[1, 4, 4], &[0.; 16]);
        let k = t(&[1, 1, 3, 3], &[0.; 9]);
        assert!(matches!(conv2d(&x, &k, 2, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let g = ConvGeometry {
            in_channels: 2,
            height: 4,
            width: 5,
            kernel_h: 3,
            kernel_w: 3,
            stride: 1,
            pad: 1,
        };
        let (oh, ow) = g.output_hw().unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.41).sin()).collect();
        let y: Vec<f64> = (0..g.patch_len() * oh * ow).map(|i| (i as f64 * 0.17).cos()).collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&g, oh, ow, &x, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; x.len()];
        col2im(&g, oh, ow, &y, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn softmax_cases() {
        let s = softmax(&t(&[2], &[0., 0.])).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&t(&[4], &[7.5; 4])).unwrap();
        assert!(s.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
        let s = softmax(&Tensor::<f64>::from_f64_slice(&[2], &[0.0, 3f64.ln()]).unwrap()).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_nan_and_stays_positive() {
        let bad = Tensor::from_parts(vec![2], vec![f32::NAN, 0.0]);
        assert!(matches!(softmax(&bad), Err(Error::Numeric(_))));
        let s = softmax(&t(&[2], &[0., -1000.])).unwrap();
        assert!(s.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn tensor_rejects_bad_shapes() {
        assert!(Tensor::<f32>::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f32>::new(vec![0], vec![]).is_err());
        assert!(Tensor::<f32>::new(vec![1], vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn maxpool_picks_window_maxima() {
        let x: Vec<f32> = vec![1., 5., 2., 0., 3., 4., 7., 8., 0., 0., 9., 1.];
        // one plane 3×4: windows cover rows 0-1 only
        let (out, arg) = maxpool2_batch(1, 3, 4, &x);
        assert_eq!(out, vec![5., 8.]);
        assert_eq!(arg, vec![1, 7]);
    }
}
