use crate::error::{Error, Result};
use crate::rng::{mix_seed, rng_stream};
use crate::tensor::{Scalar, Tensor};

use super::layer::LayerSpec;

/// Weights and bias of one weight-bearing layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// A validated feed-forward network ending in a softmax layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    /// `shapes[i]` is the per-sample input shape of layer `i`; the last entry
    /// is the output shape.
    shapes: Vec<Vec<usize>>,
    /// Layer position of each weight-bearing layer, in order.
    weight_positions: Vec<usize>,
    params: Vec<LayerParams<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        params: Vec<LayerParams<T>>,
    ) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("invalid input shape {input_shape:?}")));
        }
        match layers.last() {
            Some(LayerSpec::Softmax) => {}
            _ => return Err(Error::config("network must end with a softmax layer")),
        }
        if layers[..layers.len() - 1].contains(&LayerSpec::Softmax) {
            return Err(Error::config("softmax is only supported as the final layer"));
        }
        let mut shapes = vec![input_shape.clone()];
        let mut weight_positions = vec![];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::dim(format!("layer {i}: {e}")))?;
            shapes.push(next);
            if layer.is_weight_bearing() {
                weight_positions.push(i);
            }
        }
        if params.len() != weight_positions.len() {
            return Err(Error::dim(format!(
                "{} weight-bearing layers but {} parameter sets",
                weight_positions.len(),
                params.len()
            )));
        }
        for (j, (&pos, p)) in weight_positions.iter().zip(&params).enumerate() {
            let layer = &layers[pos];
            let ws = layer.weight_shape().unwrap();
            if p.weight.shape() != ws.as_slice() {
                return Err(Error::dim(format!(
                    "weight layer {j}: expected weight shape {ws:?}, got {:?}",
                    p.weight.shape()
                )));
            }
            let units = layer.output_units().unwrap();
            if p.bias.shape() != [units] {
                return Err(Error::dim(format!(
                    "weight layer {j}: expected bias length {units}, got {:?}",
                    p.bias.shape()
                )));
            }
        }
        Ok(Network {
            input_shape,
            layers,
            shapes,
            weight_positions,
            params,
        })
    }

    /// He-normal weights, zero biases; deterministic in `seed`.
    pub fn init(input_shape: Vec<usize>, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let init_seed = mix_seed(seed, 0x1417);
        let mut params = vec![];
        let mut j = 0u64;
        for layer in &layers {
            let Some(ws) = layer.weight_shape() else { continue };
            let fan_in = match layer {
                LayerSpec::Dense { fan_in, .. } => *fan_in,
                _ => ws[1] * ws[2] * ws[3],
            };
            let std = (2.0 / fan_in as f64).sqrt();
            let mut stream = rng_stream(init_seed, 0, j);
            let n: usize = ws.iter().product();
            let data = (0..n).map(|_| T::from_f64(stream.next_normal() * std)).collect();
            params.push(LayerParams {
                weight: Tensor::from_parts(ws, data),
                bias: Tensor::zeros(&[layer.output_units().unwrap()]),
            });
            j += 1;
        }
        Self::new(input_shape, layers, params)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Per-sample input shape of layer `i` (`i == layers.len()` gives the output shape).
    pub fn shape_at(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn output_classes(&self) -> usize {
        self.shapes.last().unwrap()[0]
    }

    pub fn n_weight_layers(&self) -> usize {
        self.weight_positions.len()
    }

    /// Layer position of weight-bearing layer `j` (0-based).
    pub fn weight_position(&self, j: usize) -> usize {
        self.weight_positions[j]
    }

    /// Weight-bearing index of layer `i`, if it carries weights.
    pub fn weight_index_of(&self, i: usize) -> Option<usize> {
        self.weight_positions.binary_search(&i).ok()
    }

    /// Number of weight-bearing layers strictly before layer position `i`.
    pub fn weight_layers_before(&self, i: usize) -> usize {
        self.weight_positions.partition_point(|&p| p < i)
    }

    /// Layer position where the frozen block of `lambda` weight layers ends.
    /// Non-weight layers belong to the weight layer that precedes them.
    pub fn frozen_boundary(&self, lambda: usize) -> Result<usize> {
        let n = self.n_weight_layers();
        if lambda > n {
            return Err(Error::config(format!(
                "lambda_frozen = {lambda} exceeds the {n} weight-bearing layers"
            )));
        }
        Ok(match lambda {
            0 => 0,
            l if l == n => self.layers.len(),
            l => self.weight_positions[l],
        })
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            weight_positions: self.weight_positions.clone(),
            params: self
                .params
                .iter()
                .map(|p| LayerParams {
                    weight: p.weight.cast(),
                    bias: p.bias.cast(),
                })
                .collect(),
        }
    }

    /// Per-sample batch shape helper: `[batch] ++ shape_at(i)`.
    pub(crate) fn batch_shape(&self, i: usize, batch: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.shapes[i].len() + 1);
        s.push(batch);
        s.extend_from_slice(&self.shapes[i]);
        s
    }
}
