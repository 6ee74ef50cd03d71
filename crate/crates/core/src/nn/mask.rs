//! Bernoulli masks and the stochastic configuration of a forward pass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_stream, RngStream};
use crate::tensor::Scalar;

use super::network::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Zero individual weights.
    Dropconnect,
    /// Zero whole output neurons / channels.
    Dropout,
    /// No masking anywhere.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Kept units are scaled by `1 / (1 − p)`.
    Inverted,
    None,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Dropconnect => "dropconnect",
            MaskMode::Dropout => "dropout",
            MaskMode::Deterministic => "deterministic",
        })
    }
}

impl FromStr for MaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropconnect" => Ok(MaskMode::Dropconnect),
            "dropout" => Ok(MaskMode::Dropout),
            "deterministic" => Ok(MaskMode::Deterministic),
            _ => Err(Error::config(format!("unknown mask mode `{s}`"))),
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::Inverted => "inverted",
            ScaleMode::None => "none",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverted" => Ok(ScaleMode::Inverted),
            "none" => Ok(ScaleMode::None),
            _ => Err(Error::config(format!("unknown scale mode `{s}`"))),
        }
    }
}

/// Which weight layers are masked, how, and with what drop probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskPlan {
    /// Probability that a weight (or neuron) is zeroed.
    pub drop_prob: f64,
    /// Leading weight-bearing layers that are never masked.
    pub lambda_frozen: usize,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
}

impl MaskPlan {
    pub fn new(
        drop_prob: f64,
        lambda_frozen: usize,
        mode: MaskMode,
        scale_mode: ScaleMode,
    ) -> Result<Self> {
        let plan = MaskPlan {
            drop_prob,
            lambda_frozen,
            mode,
            scale_mode,
        };
        plan.check_prob()?;
        Ok(plan)
    }

    pub fn dropconnect(drop_prob: f64, lambda_frozen: usize) -> Result<Self> {
        Self::new(drop_prob, lambda_frozen, MaskMode::Dropconnect, ScaleMode::Inverted)
    }

    pub fn deterministic() -> Self {
        MaskPlan {
            drop_prob: 0.0,
            lambda_frozen: 0,
            mode: MaskMode::Deterministic,
            scale_mode: ScaleMode::None,
        }
    }

    fn check_prob(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::config(format!(
                "drop probability {} outside [0, 1]",
                self.drop_prob
            )));
        }
        if self.mode != MaskMode::Deterministic
            && self.scale_mode == ScaleMode::Inverted
            && self.drop_prob >= 1.0
        {
            return Err(Error::config("inverted scaling needs drop probability < 1"));
        }
        Ok(())
    }

    pub fn validate_for<T: Scalar>(&self, net: &Network<T>) -> Result<()> {
        self.check_prob()?;
        if self.lambda_frozen > net.n_weight_layers() {
            return Err(Error::config(format!(
                "lambda_frozen = {} exceeds the {} weight-bearing layers",
                self.lambda_frozen,
                net.n_weight_layers()
            )));
        }
        Ok(())
    }

    /// Multiplier applied to kept units.
    pub fn scale(&self) -> f64 {
        match self.scale_mode {
            ScaleMode::Inverted => 1.0 / (1.0 - self.drop_prob),
            ScaleMode::None => 1.0,
        }
    }

    /// True if weight layer `j` draws a mask under this plan.
    pub fn is_stochastic(&self, j: usize) -> bool {
        self.mode != MaskMode::Deterministic && j >= self.lambda_frozen
    }
}

/// Binary keep-mask; `1` keeps, `0` drops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    shape: Vec<usize>,
    keep: Vec<u8>,
}

impl Mask {
    pub fn new(shape: Vec<usize>, keep: Vec<u8>) -> Result<Self> {
        if shape.iter().product::<usize>() != keep.len() {
            return Err(Error::dim(format!(
                "mask shape {shape:?} does not hold {} elements",
                keep.len()
            )));
        }
        if keep.iter().any(|&k| k > 1) {
            return Err(Error::data("mask elements must be 0 or 1"));
        }
        Ok(Mask { shape, keep })
    }

    pub fn ones(shape: &[usize]) -> Self {
        Mask {
            shape: shape.to_vec(),
            keep: vec![1; shape.iter().product()],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Mask {
            shape: shape.to_vec(),
            keep: vec![0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn keep(&self) -> &[u8] {
        &self.keep
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn dropped(&self) -> usize {
        self.keep.iter().filter(|&&k| k == 0).count()
    }

    /// `w ⊙ mask`, with dropped positions set to exactly zero.
    pub(crate) fn apply<T: Scalar>(&self, w: &[T]) -> Vec<T> {
        debug_assert_eq!(w.len(), self.keep.len());
        w.iter()
            .zip(&self.keep)
            .map(|(&v, &k)| if k == 1 { v } else { T::zero() })
            .collect()
    }
}

/// Each element is dropped independently with probability `p`.
pub fn sample_mask(shape: &[usize], p: f64, stream: &mut RngStream) -> Result<Mask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("drop probability {p} outside [0, 1]")));
    }
    let n = shape.iter().product();
    let keep = (0..n).map(|_| u8::from(stream.next_f64() >= p)).collect();
    Ok(Mask {
        shape: shape.to_vec(),
        keep,
    })
}

/// The noise applied to one weight-bearing layer during a pass.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerNoise {
    /// Unmasked, unscaled.
    None,
    /// Weight mask with the kernel's shape.
    DropConnect { mask: Mask, scale: f64 },
    /// Neuron/channel mask with one entry per output unit.
    Dropout { mask: Mask, scale: f64 },
}

/// One [`LayerNoise`] per weight-bearing layer of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    layers: Vec<LayerNoise>,
}

impl MaskSet {
    pub fn deterministic(n_weight_layers: usize) -> Self {
        MaskSet {
            layers: vec![LayerNoise::None; n_weight_layers],
        }
    }

    pub fn from_layers(layers: Vec<LayerNoise>) -> Self {
        MaskSet { layers }
    }

    /// Masks for pass `pass_index`: weight layer `j` draws from
    /// `rng_stream(seed, pass_index, j)` if the plan makes it stochastic.
    pub fn sample<T: Scalar>(
        net: &Network<T>,
        plan: &MaskPlan,
        seed: u64,
        pass_index: u64,
    ) -> Result<Self> {
        plan.validate_for(net)?;
        let layers = (0..net.n_weight_layers())
            .map(|j| Self::sample_layer(net, plan, seed, pass_index, j))
            .collect::<Result<_>>()?;
        Ok(MaskSet { layers })
    }

    pub(crate) fn sample_layer<T: Scalar>(
        net: &Network<T>,
        plan: &MaskPlan,
        seed: u64,
        pass_index: u64,
        j: usize,
    ) -> Result<LayerNoise> {
        if !plan.is_stochastic(j) {
            return Ok(LayerNoise::None);
        }
        let layer = &net.layers()[net.weight_position(j)];
        let mut stream = rng_stream(seed, pass_index, j as u64);
        let scale = plan.scale();
        Ok(match plan.mode {
            MaskMode::Dropconnect => LayerNoise::DropConnect {
                mask: sample_mask(&layer.weight_shape().unwrap(), plan.drop_prob, &mut stream)?,
                scale,
            },
            MaskMode::Dropout => LayerNoise::Dropout {
                mask: sample_mask(&[layer.output_units().unwrap()], plan.drop_prob, &mut stream)?,
                scale,
            },
            MaskMode::Deterministic => LayerNoise::None,
        })
    }

    pub fn layers(&self) -> &[LayerNoise] {
        &self.layers
    }

    pub fn get(&self, j: usize) -> &LayerNoise {
        &self.layers[j]
    }
}
