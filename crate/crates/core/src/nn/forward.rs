//! Stochastic forward passes.
//!
//! Activations travel as flat row-major buffers with a leading batch axis.
//! Every sample is computed independently with a fixed reduction order, so a
//! sample's output does not depend on which batch it was evaluated in.

use crate::error::{Error, Result};
use crate::tensor::{conv2d_batch, gemm, maxpool2_batch, softmax_into, Scalar, Tensor};

use super::layer::{Activation, LayerSpec};
use super::mask::{LayerNoise, Mask, MaskPlan, MaskSet};
use super::network::Network;

/// What backpropagation needs from one layer of a forward pass.
#[derive(Clone, Debug)]
pub(crate) enum Saved<T> {
    Weight {
        input: Vec<T>,
        /// `w ⊙ mask` and the mask itself when DropConnect was active.
        masked_weight: Option<Vec<T>>,
        weight_mask: Option<Vec<u8>>,
        neuron_mask: Option<Vec<u8>>,
        scale: T,
    },
    Relu {
        output: Vec<T>,
    },
    Maxpool {
        argmax: Vec<usize>,
        input_len: usize,
    },
    Flatten,
    Softmax {
        probs: Vec<T>,
    },
}

/// Per-layer record of a traced forward pass.
#[derive(Clone, Debug)]
pub(crate) struct Trace<T> {
    pub(crate) batch: usize,
    pub(crate) saved: Vec<Saved<T>>,
}

/// Split an input into `(batch, flat data)` given the expected per-sample shape.
pub(crate) fn batch_of<'a, T: Scalar>(x: &'a Tensor<T>, sample_shape: &[usize]) -> Result<usize> {
    let s = x.shape();
    if s == sample_shape {
        Ok(1)
    } else if s.len() == sample_shape.len() + 1 && &s[1..] == sample_shape {
        Ok(s[0])
    } else {
        Err(Error::dim(format!(
            "input shape {s:?} does not match per-sample shape {sample_shape:?}"
        )))
    }
}

/// Linear part of a weight-bearing layer, without bias: `x · w` (dense) or
/// the cross-correlation of `x` with `w` (conv).
fn linear<T: Scalar>(
    layer: &LayerSpec,
    in_shape: &[usize],
    batch: usize,
    x: &[T],
    w: &[T],
) -> Result<Vec<T>> {
    match *layer {
        LayerSpec::Dense { fan_in, fan_out } => {
            let mut z = vec![T::zero(); batch * fan_out];
            gemm(batch, fan_in, fan_out, x, w, &mut z);
            Ok(z)
        }
        LayerSpec::Conv2d { out_channels, .. } => {
            let g = layer.conv_geometry(in_shape).unwrap();
            conv2d_batch(&g, out_channels, batch, x, w)
        }
        _ => unreachable!("linear() on a non-weight layer"),
    }
}

/// Spatial positions per output unit (1 for dense).
fn unit_stride(layer: &LayerSpec, out_shape: &[usize]) -> usize {
    match layer {
        LayerSpec::Conv2d { .. } => out_shape[1] * out_shape[2],
        _ => 1,
    }
}

fn weight_layer<T: Scalar>(
    layer: &LayerSpec,
    in_shape: &[usize],
    out_shape: &[usize],
    batch: usize,
    x: Vec<T>,
    w: &[T],
    bias: &[T],
    noise: &LayerNoise,
    trace: Option<&mut Vec<Saved<T>>>,
) -> Result<Vec<T>> {
    let units = bias.len();
    let spread = unit_stride(layer, out_shape);
    let unit = |e: usize| (e / spread) % units;
    let (z, masked_weight, weight_mask, neuron_mask, scale) = match noise {
        LayerNoise::None => {
            let mut z = linear(layer, in_shape, batch, &x, w)?;
            for (e, v) in z.iter_mut().enumerate() {
                *v += bias[unit(e)];
            }
            (z, None, None, None, T::one())
        }
        LayerNoise::DropConnect { mask, scale } => {
            if mask.len() != w.len() {
                return Err(Error::dim(format!(
                    "DropConnect mask shape {:?} does not match weight size {}",
                    mask.shape(),
                    w.len()
                )));
            }
            let s = T::from_f64(*scale);
            let wm = mask.apply(w);
            let mut z = linear(layer, in_shape, batch, &x, &wm)?;
            for (e, v) in z.iter_mut().enumerate() {
                *v = *v * s + bias[unit(e)];
            }
            let keep = trace.is_some().then(|| mask.keep().to_vec());
            (z, Some(wm), keep, None, s)
        }
        LayerNoise::Dropout { mask, scale } => {
            if mask.len() != units {
                return Err(Error::dim(format!(
                    "dropout mask length {} does not match {units} output units",
                    mask.len()
                )));
            }
            let s = T::from_f64(*scale);
            let keep = mask.keep();
            let mut z = linear(layer, in_shape, batch, &x, w)?;
            for (e, v) in z.iter_mut().enumerate() {
                let u = unit(e);
                *v = if keep[u] == 1 { (*v + bias[u]) * s } else { T::zero() };
            }
            (z, None, None, Some(keep.to_vec()), s)
        }
    };
    if let Some(t) = trace {
        t.push(Saved::Weight {
            input: x,
            masked_weight,
            weight_mask,
            neuron_mask,
            scale,
        });
    }
    Ok(z)
}

/// Run layers `[start, end)` of `net` on a batch whose per-sample shape is
/// `net.shape_at(start)`. `masks` is indexed by absolute weight-layer index.
pub(crate) fn forward_layers<T: Scalar>(
    net: &Network<T>,
    start: usize,
    end: usize,
    batch: usize,
    mut x: Vec<T>,
    masks: &MaskSet,
    mut trace: Option<&mut Trace<T>>,
) -> Result<Vec<T>> {
    let mut j = net.weight_layers_before(start);
    for i in start..end {
        let layer = &net.layers()[i];
        let in_shape = net.shape_at(i);
        let out_shape = net.shape_at(i + 1);
        let saved = trace.as_deref_mut().map(|t| &mut t.saved);
        x = match layer {
            LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } => {
                let p = &net.params()[j];
                let y = weight_layer(
                    layer,
                    in_shape,
                    out_shape,
                    batch,
                    x,
                    p.weight.data(),
                    p.bias.data(),
                    masks.get(j),
                    saved,
                )?;
                j += 1;
                y
            }
            LayerSpec::Relu => {
                for v in x.iter_mut() {
                    if !(*v > T::zero()) {
                        *v = T::zero();
                    }
                }
                if let Some(s) = saved {
                    s.push(Saved::Relu { output: x.clone() });
                }
                x
            }
            LayerSpec::Maxpool2 => {
                let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
                let (y, argmax) = maxpool2_batch(batch * c, h, w, &x);
                if let Some(s) = saved {
                    s.push(Saved::Maxpool {
                        argmax,
                        input_len: x.len(),
                    });
                }
                y
            }
            LayerSpec::Flatten => {
                if let Some(s) = saved {
                    s.push(Saved::Flatten);
                }
                x
            }
            LayerSpec::Softmax => {
                let c = in_shape[0];
                let mut y = vec![T::zero(); x.len()];
                for (row, out) in x.chunks(c).zip(y.chunks_mut(c)) {
                    softmax_into(row, out);
                }
                if let Some(s) = saved {
                    s.push(Saved::Softmax { probs: y.clone() });
                }
                y
            }
        };
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite activation after layer {} (flat index {i})",
            end - 1
        )));
    }
    Ok(x)
}

/// Batched forward pass with explicit masks; returns `[B × C]` probabilities.
pub fn forward_with_masks<T: Scalar>(
    net: &Network<T>,
    x: &Tensor<T>,
    masks: &MaskSet,
) -> Result<Tensor<T>> {
    check_mask_count(net, masks)?;
    let batch = batch_of(x, net.input_shape())?;
    let out = forward_layers(net, 0, net.layers().len(), batch, x.data().to_vec(), masks, None)?;
    Ok(Tensor::from_parts(net.batch_shape(net.layers().len(), batch), out))
}

pub(crate) fn forward_traced<T: Scalar>(
    net: &Network<T>,
    x: &Tensor<T>,
    masks: &MaskSet,
) -> Result<(Tensor<T>, Trace<T>)> {
    check_mask_count(net, masks)?;
    let batch = batch_of(x, net.input_shape())?;
    let mut trace = Trace {
        batch,
        saved: Vec::with_capacity(net.layers().len()),
    };
    let out = forward_layers(
        net,
        0,
        net.layers().len(),
        batch,
        x.data().to_vec(),
        masks,
        Some(&mut trace),
    )?;
    Ok((Tensor::from_parts(net.batch_shape(net.layers().len(), batch), out), trace))
}

fn check_mask_count<T: Scalar>(net: &Network<T>, masks: &MaskSet) -> Result<()> {
    if masks.layers().len() != net.n_weight_layers() {
        return Err(Error::dim(format!(
            "{} layer masks for {} weight-bearing layers",
            masks.layers().len(),
            net.n_weight_layers()
        )));
    }
    Ok(())
}

/// Batched stochastic pass `pass_index` under `plan`; returns `[B × C]`.
pub fn forward_batch<T: Scalar>(
    net: &Network<T>,
    x: &Tensor<T>,
    plan: &MaskPlan,
    root_seed: u64,
    pass_index: u64,
) -> Result<Tensor<T>> {
    let masks = MaskSet::sample(net, plan, root_seed, pass_index)?;
    forward_with_masks(net, x, &masks)
}

/// Probability vector for a single input under one stochastic pass.
pub fn network_forward<T: Scalar>(
    net: &Network<T>,
    x: &Tensor<T>,
    plan: &MaskPlan,
    root_seed: u64,
    pass_index: u64,
) -> Result<Tensor<T>> {
    if x.shape() != net.input_shape() {
        return Err(Error::dim(format!(
            "input shape {:?} does not match network input {:?}",
            x.shape(),
            net.input_shape()
        )));
    }
    let out = forward_batch(net, x, plan, root_seed, pass_index)?;
    let c = net.output_classes();
    Ok(Tensor::from_parts(vec![c], out.into_data()))
}

/// Deterministic forward pass (no masking, no scaling).
pub fn deterministic_forward<T: Scalar>(net: &Network<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    forward_with_masks(net, x, &MaskSet::deterministic(net.n_weight_layers()))
}

fn single_layer<T: Scalar>(
    layer: &LayerSpec,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    noise: LayerNoise,
    act: Activation,
) -> Result<Tensor<T>> {
    let ws = layer
        .weight_shape()
        .ok_or_else(|| Error::config(format!("{} layer has no weights", layer.name())))?;
    if w.shape() != ws.as_slice() {
        return Err(Error::dim(format!("weight shape {:?}, layer expects {ws:?}", w.shape())));
    }
    let units = layer.output_units().unwrap();
    if bias.shape() != [units] {
        return Err(Error::dim(format!("bias shape {:?}, expected [{units}]", bias.shape())));
    }
    let in_shape: Vec<usize> = match *layer {
        LayerSpec::Dense { fan_in, .. } => vec![fan_in],
        LayerSpec::Conv2d { .. } => x.shape()[x.shape().len().saturating_sub(3)..].to_vec(),
        _ => unreachable!(),
    };
    let batch = batch_of(x, &in_shape)?;
    let out_shape = layer.output_shape(&in_shape)?;
    let mut z = weight_layer(
        layer,
        &in_shape,
        &out_shape,
        batch,
        x.data().to_vec(),
        w.data(),
        bias.data(),
        &noise,
        None,
    )?;
    if act == Activation::Relu {
        for v in z.iter_mut() {
            if !(*v > T::zero()) {
                *v = T::zero();
            }
        }
    }
    let shape = if x.shape() == in_shape.as_slice() {
        out_shape
    } else {
        let mut s = vec![batch];
        s.extend(out_shape);
        s
    };
    let t = Tensor::from_parts(shape, z);
    t.ensure_finite("weight layer forward")?;
    Ok(t)
}

/// `σ(scale · (x · (w ⊙ mask)) + bias)` for a dense or conv layer. `x` may be a
/// single sample or carry a leading batch axis.
pub fn dropconnect_forward<T: Scalar>(
    layer: &LayerSpec,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    mask: &Mask,
    scale: f64,
    act: Activation,
) -> Result<Tensor<T>> {
    if mask.shape() != w.shape() {
        return Err(Error::dim(format!(
            "mask shape {:?} differs from weight shape {:?}",
            mask.shape(),
            w.shape()
        )));
    }
    let noise = LayerNoise::DropConnect {
        mask: mask.clone(),
        scale,
    };
    single_layer(layer, x, w, bias, noise, act)
}

/// `σ(scale · ((x · w + bias) ⊙ neuron_mask))` for a dense or conv layer.
pub fn dropout_forward<T: Scalar>(
    layer: &LayerSpec,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Tensor<T>,
    neuron_mask: &Mask,
    scale: f64,
    act: Activation,
) -> Result<Tensor<T>> {
    let units = layer.output_units().unwrap_or(0);
    if neuron_mask.len() != units {
        return Err(Error::dim(format!(
            "neuron mask length {} differs from {units} output units",
            neuron_mask.len()
        )));
    }
    let noise = LayerNoise::Dropout {
        mask: neuron_mask.clone(),
        scale,
    };
    single_layer(layer, x, w, bias, noise, act)
}
