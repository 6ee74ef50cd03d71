//! Random networks and a finite-difference gradient oracle shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use selectdc::nn::{forward_with_masks, LayerSpec, MaskMode, MaskPlan, MaskSet, Network, ScaleMode};
use selectdc::rng::{rng_stream, RngStream};
use selectdc::tensor::{Scalar, Tensor};
use selectdc::train::{compute_gradients, loss_mc};

pub fn conv(cin: usize, cout: usize, k: usize, stride: usize, pad: usize) -> LayerSpec {
    LayerSpec::Conv2d {
        in_channels: cin,
        out_channels: cout,
        kernel_h: k,
        kernel_w: k,
        stride,
        pad,
    }
}

pub fn dense(fan_in: usize, fan_out: usize) -> LayerSpec {
    LayerSpec::Dense { fan_in, fan_out }
}

/// One of several small architectures mixing dense, conv, relu, pooling and
/// flatten layers; every variant has at most 200 parameters.
pub fn small_architecture(rng: &mut RngStream) -> (Vec<usize>, Vec<LayerSpec>) {
    let classes = 2 + rng.below(3) as usize;
    match rng.below(4) {
        0 => {
            let d = 3 + rng.below(5) as usize;
            let h = 3 + rng.below(6) as usize;
            let h2 = 2 + rng.below(5) as usize;
            (
                vec![d],
                vec![
                    dense(d, h),
                    LayerSpec::Relu,
                    dense(h, h2),
                    LayerSpec::Relu,
                    dense(h2, classes),
                    LayerSpec::Softmax,
                ],
            )
        }
        1 => (
            vec![1, 5, 5],
            vec![
                conv(1, 2, 3, 1, 0),
                LayerSpec::Relu,
                LayerSpec::Flatten,
                dense(18, classes),
                LayerSpec::Softmax,
            ],
        ),
        2 => (
            vec![1, 6, 6],
            vec![
                conv(1, 2, 3, 1, 0),
                LayerSpec::Relu,
                LayerSpec::Maxpool2,
                LayerSpec::Flatten,
                dense(8, 4),
                LayerSpec::Relu,
                dense(4, classes),
                LayerSpec::Softmax,
            ],
        ),
        _ => (
            vec![2, 6, 6],
            vec![
                conv(2, 3, 3, 1, 1),
                LayerSpec::Relu,
                conv(3, 2, 2, 2, 0),
                LayerSpec::Flatten,
                dense(18, classes),
                LayerSpec::Softmax,
            ],
        ),
    }
}

/// Larger random architectures (up to five weight layers) for inference tests.
pub fn random_architecture(rng: &mut RngStream) -> (Vec<usize>, Vec<LayerSpec>) {
    let classes = 2 + rng.below(9) as usize;
    if rng.below(2) == 0 {
        let mut width = 2 + rng.below(20) as usize;
        let input = vec![width];
        let mut layers = vec![];
        for _ in 0..rng.below(4) {
            let next = 2 + rng.below(24) as usize;
            layers.push(dense(width, next));
            layers.push(LayerSpec::Relu);
            width = next;
        }
        layers.push(dense(width, classes));
        layers.push(LayerSpec::Softmax);
        (input, layers)
    } else {
        let c = 1 + rng.below(2) as usize;
        let side = 6 + rng.below(5) as usize;
        let f1 = 1 + rng.below(4) as usize;
        let f2 = 1 + rng.below(4) as usize;
        let pad = rng.below(2) as usize;
        let mut layers = vec![conv(c, f1, 3, 1, pad), LayerSpec::Relu];
        let mut s = side + 2 * pad - 2;
        if rng.below(2) == 0 {
            layers.push(LayerSpec::Maxpool2);
            s /= 2;
        }
        layers.push(conv(f1, f2, 2, 1, 0));
        layers.push(LayerSpec::Relu);
        s -= 1;
        layers.push(LayerSpec::Flatten);
        let hidden = 3 + rng.below(8) as usize;
        layers.push(dense(f2 * s * s, hidden));
        layers.push(LayerSpec::Relu);
        layers.push(dense(hidden, classes));
        layers.push(LayerSpec::Softmax);
        (vec![c, side, side], layers)
    }
}

/// He-initialised network with small random biases.
pub fn random_network<T: Scalar>(input: Vec<usize>, layers: Vec<LayerSpec>, seed: u64) -> Network<T> {
    let mut net = Network::<T>::init(input, layers, seed).unwrap();
    let mut rng = rng_stream(seed, 1, 99);
    for p in net.params_mut() {
        for b in p.bias.data_mut() {
            *b = T::from_f64(0.2 * rng.next_f64() - 0.1);
        }
    }
    net
}

pub fn random_batch<T: Scalar>(shape: &[usize], batch: usize, rng: &mut RngStream) -> Tensor<T> {
    let mut full = vec![batch];
    full.extend_from_slice(shape);
    let n: usize = full.iter().product();
    Tensor::new(full, (0..n).map(|_| T::from_f64(2.0 * rng.next_f64() - 1.0)).collect()).unwrap()
}

pub fn random_plan(rng: &mut RngStream, n_weight_layers: usize) -> MaskPlan {
    let p = [0.0, 0.1, 0.3, 0.5][rng.below(4) as usize];
    let lambda = rng.below(n_weight_layers as u64 + 1) as usize;
    let mode = [MaskMode::Dropconnect, MaskMode::Dropout, MaskMode::Dropconnect][rng.below(3) as usize];
    let scale = [ScaleMode::Inverted, ScaleMode::None][rng.below(2) as usize];
    MaskPlan::new(p, lambda, mode, scale).unwrap()
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub components: usize,
    /// Components whose numeric derivative changes with the step size, i.e.
    /// the perturbation crosses a ReLU or max-pool switch.
    pub nonsmooth: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn perturbed(net: &Network<f64>, j: usize, bias: bool, i: usize, delta: f64) -> Network<f64> {
    let mut n = net.clone();
    let p = &mut n.params_mut()[j];
    let t = if bias { &mut p.bias } else { &mut p.weight };
    t.data_mut()[i] += delta;
    n
}

/// Compare analytic gradients with central differences at step `h`.
pub fn gradient_check(
    net: &Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    masks: &MaskSet,
    weight_decay: f64,
    h: f64,
) -> GradCheck {
    let (_, grads, _) = compute_gradients(net, x, labels, masks, weight_decay).unwrap();
    let classes = net.output_classes();
    let loss = |n: &Network<f64>| {
        let p = forward_with_masks(n, x, masks).unwrap();
        loss_mc(p.data(), classes, labels, n.params(), weight_decay).unwrap()
    };
    let central = |j: usize, bias: bool, i: usize, step: f64| {
        (loss(&perturbed(net, j, bias, i, step)) - loss(&perturbed(net, j, bias, i, -step)))
            / (2.0 * step)
    };
    let mut out = GradCheck {
        max_rel_err: 0.0,
        components: 0,
        nonsmooth: 0,
    };
    for (j, g) in grads.layers().iter().enumerate() {
        for (bias, t) in [(false, &g.weight), (true, &g.bias)] {
            for (i, &a) in t.data().iter().enumerate() {
                let num = central(j, bias, i, h);
                let fine = central(j, bias, i, h / 10.0);
                out.components += 1;
                if rel_err(num, fine) > 1e-6 {
                    out.nonsmooth += 1;
                    continue;
                }
                out.max_rel_err = out.max_rel_err.max(rel_err(a, num));
            }
        }
    }
    out
}
