//! Reverse-mode gradients of the training loss.
//!
//! Masks are treated as constants: a dropped weight gets no gradient from the
//! data term, only from the weight-decay penalty.

use crate::error::{Error, Result};
use crate::nn::{forward_traced, LayerParams, LayerSpec, MaskSet, Network, Saved};
use crate::tensor::{col2im, gemm_a_bt, gemm_at_b_acc, im2col, Scalar, Tensor};

use super::loss::loss_mc;

/// One gradient tensor per weight and bias, shaped like the network's.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &[LayerParams<T>]) -> Self {
        Gradients {
            layers: params
                .iter()
                .map(|p| LayerParams {
                    weight: Tensor::zeros(p.weight.shape()),
                    bias: Tensor::zeros(p.bias.shape()),
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|g| {
            g.weight.data().iter().chain(g.bias.data()).all(|v| v.is_finite())
        })
    }
}

/// Gradient of `weight_decay · Σ‖W‖²` alone: `2 · weight_decay · W`.
pub fn weight_decay_gradients<T: Scalar>(net: &Network<T>, weight_decay: f64) -> Gradients<T> {
    let mut g = Gradients::zeros_like(net.params());
    add_weight_decay(&mut g, net, weight_decay);
    g
}

fn add_weight_decay<T: Scalar>(g: &mut Gradients<T>, net: &Network<T>, weight_decay: f64) {
    if weight_decay == 0.0 {
        return;
    }
    let k = T::from_f64(2.0 * weight_decay);
    for (gl, p) in g.layers.iter_mut().zip(net.params()) {
        for (gv, &w) in gl.weight.data_mut().iter_mut().zip(p.weight.data()) {
            *gv += k * w;
        }
    }
}

/// Forward `x` under `masks`, evaluate the loss and backpropagate it.
/// Returns `(loss, gradients, probabilities)`.
pub fn compute_gradients<T: Scalar>(
    net: &Network<T>,
    x: &Tensor<T>,
    labels: &[usize],
    masks: &MaskSet,
    weight_decay: f64,
) -> Result<(f64, Gradients<T>, Tensor<T>)> {
    let (probs, trace) = forward_traced(net, x, masks)?;
    let batch = trace.batch;
    if labels.len() != batch {
        return Err(Error::data(format!("{} labels for a batch of {batch}", labels.len())));
    }
    let classes = net.output_classes();
    let loss = loss_mc(probs.data(), classes, labels, net.params(), weight_decay)?;

    let mut grads = Gradients::zeros_like(net.params());
    let inv_b = T::from_f64(1.0 / batch as f64);
    let mut dy: Vec<T> = Vec::new();
    let n_layers = net.layers().len();

    for i in (0..n_layers).rev() {
        let layer = &net.layers()[i];
        let need_input_grad = i > 0;
        dy = match (&trace.saved[i], layer) {
            (Saved::Softmax { probs }, LayerSpec::Softmax) => {
                // d(mean NLL)/d(logits) = (p − onehot) / B
                debug_assert_eq!(i, n_layers - 1);
                let mut d = probs.clone();
                for (row, &y) in d.chunks_mut(classes).zip(labels) {
                    row[y] = row[y] - T::one();
                    for v in row.iter_mut() {
                        *v = *v * inv_b;
                    }
                }
                d
            }
            (Saved::Flatten, LayerSpec::Flatten) => dy,
            (Saved::Relu { output }, LayerSpec::Relu) => {
                for (d, &o) in dy.iter_mut().zip(output) {
                    if !(o > T::zero()) {
                        *d = T::zero();
                    }
                }
                dy
            }
            (Saved::Maxpool { argmax, input_len }, LayerSpec::Maxpool2) => {
                let mut dx = vec![T::zero(); *input_len];
                for (&a, &d) in argmax.iter().zip(&dy) {
                    dx[a] += d;
                }
                dx
            }
            (
                Saved::Weight {
                    input,
                    masked_weight,
                    weight_mask,
                    neuron_mask,
                    scale,
                },
                LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. },
            ) => {
                let j = net.weight_index_of(i).unwrap();
                let w_raw = net.params()[j].weight.data();
                let units = net.params()[j].bias.len();
                let out_shape = net.shape_at(i + 1);
                let spread = match layer {
                    LayerSpec::Conv2d { .. } => out_shape[1] * out_shape[2],
                    _ => 1,
                };

                // g = dL/d(linear output); bias gradient accumulates alongside.
                let mut g = dy;
                let gb = grads.layers[j].bias.data_mut();
                match neuron_mask {
                    Some(keep) => {
                        for (e, v) in g.iter_mut().enumerate() {
                            let u = (e / spread) % units;
                            *v = if keep[u] == 1 { *v * *scale } else { T::zero() };
                            gb[u] += *v;
                        }
                    }
                    None => {
                        for (e, v) in g.iter_mut().enumerate() {
                            gb[(e / spread) % units] += *v;
                            *v = *v * *scale;
                        }
                    }
                }

                let w_used: &[T] = masked_weight.as_deref().unwrap_or(w_raw);
                let gw = grads.layers[j].weight.data_mut();
                let dx = match *layer {
                    LayerSpec::Dense { fan_in, fan_out } => {
                        gemm_at_b_acc(fan_in, batch, fan_out, input, &g, gw);
                        if need_input_grad {
                            let mut dx = vec![T::zero(); batch * fan_in];
                            gemm_a_bt(batch, fan_out, fan_in, &g, w_used, &mut dx);
                            dx
                        } else {
                            vec![]
                        }
                    }
                    LayerSpec::Conv2d { out_channels, .. } => {
                        let geo = layer.conv_geometry(net.shape_at(i)).unwrap();
                        let (oh, ow) = geo.output_hw()?;
                        let npos = oh * ow;
                        let plen = geo.patch_len();
                        let in_len = geo.in_channels * geo.height * geo.width;
                        let out_len = out_channels * npos;
                        let mut cols = vec![T::zero(); plen * npos];
                        let mut gw_b = vec![T::zero(); out_channels * plen];
                        let mut dcols = vec![T::zero(); plen * npos];
                        let mut dx = if need_input_grad {
                            vec![T::zero(); batch * in_len]
                        } else {
                            vec![]
                        };
                        for b in 0..batch {
                            let g_b = &g[b * out_len..(b + 1) * out_len];
                            im2col(&geo, oh, ow, &input[b * in_len..(b + 1) * in_len], &mut cols);
                            gemm_a_bt(out_channels, npos, plen, g_b, &cols, &mut gw_b);
                            for (a, &v) in gw.iter_mut().zip(&gw_b) {
                                *a += v;
                            }
                            if need_input_grad {
                                dcols.fill(T::zero());
                                gemm_at_b_acc(plen, out_channels, npos, w_used, g_b, &mut dcols);
                                col2im(&geo, oh, ow, &dcols, &mut dx[b * in_len..(b + 1) * in_len]);
                            }
                        }
                        dx
                    }
                    _ => unreachable!(),
                };
                if let Some(keep) = weight_mask {
                    // Dropped weights are constant zero in this pass.
                    for (gv, &k) in gw.iter_mut().zip(keep) {
                        if k == 0 {
                            *gv = T::zero();
                        }
                    }
                }
                dx
            }
            (s, l) => {
                return Err(Error::Numeric(format!(
                    "trace mismatch at layer {i}: {} vs {:?}",
                    l.name(),
                    std::mem::discriminant(s)
                )))
            }
        };
    }

    add_weight_decay(&mut grads, net, weight_decay);
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((loss, grads, probs))
}
