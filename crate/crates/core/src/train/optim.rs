use crate::nn::LayerParams;
use crate::tensor::{Scalar, Tensor};

use super::backward::Gradients;

/// Velocity buffers, one per weight and bias tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T = f32> {
    velocity: Vec<LayerParams<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &[LayerParams<T>]) -> Self {
        OptimizerState {
            velocity: params
                .iter()
                .map(|p| LayerParams {
                    weight: Tensor::zeros(p.weight.shape()),
                    bias: Tensor::zeros(p.bias.shape()),
                })
                .collect(),
        }
    }

    pub fn velocity(&self) -> &[LayerParams<T>] {
        &self.velocity
    }
}

/// Nesterov update of one buffer: `v ← μv − η·g`, `w ← w + μv − η·g`.
pub fn nesterov_update<T: Scalar>(w: &mut [T], g: &[T], v: &mut [T], lr: f64, momentum: f64) {
    let lr = T::from_f64(lr);
    let mu = T::from_f64(momentum);
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = mu * *v - lr * g;
        *w = *w + mu * *v - lr * g;
    }
}

/// Apply one Nesterov step to every parameter of a network.
pub fn sgd_nesterov_step<T: Scalar>(
    params: &mut [LayerParams<T>],
    grads: &Gradients<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
    momentum: f64,
) {
    for ((p, g), v) in params.iter_mut().zip(grads.layers()).zip(&mut state.velocity) {
        nesterov_update(p.weight.data_mut(), g.weight.data(), v.weight.data_mut(), lr, momentum);
        nesterov_update(p.bias.data_mut(), g.bias.data(), v.bias.data_mut(), lr, momentum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_update() {
        let (mut w, mut v) = ([1.0f64], [0.0f64]);
        nesterov_update(&mut w, &[1.0], &mut v, 0.1, 0.9);
        assert!((v[0] + 0.1).abs() < 1e-15);
        assert!((w[0] - 0.81).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let (mut w, mut v) = ([0.3f32, -2.0], [0.0f32; 2]);
        nesterov_update(&mut w, &[0.0, 0.0], &mut v, 0.5, 0.9);
        assert_eq!(w, [0.3, -2.0]);
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let (mut w, mut v) = ([1.0f64, 2.0], [0.0f64; 2]);
        nesterov_update(&mut w, &[0.5, -1.0], &mut v, 0.1, 0.0);
        assert_eq!(w, [1.0 - 0.05, 2.0 + 0.1]);
    }
}
