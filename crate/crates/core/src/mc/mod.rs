//! Monte Carlo predictive inference.
//!
//! [`mc_predict_naive`] runs the whole network once per pass. [`select_dc_predict`]
//! evaluates the deterministic prefix of `λ` weight layers once per batch,
//! caches the activation at the block boundary and replays only the
//! stochastic tail. Mask streams are keyed by absolute weight-layer index, so
//! the two paths perform the same arithmetic and agree bit for bit.

mod rotate;

pub use rotate::{rotate_image, rotation_entropy_sweep, RotationPoint};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    batch_of, forward_layers, forward_with_masks, LayerSpec, MaskMode, MaskPlan, MaskSet, Network,
    ScaleMode,
};
use crate::tensor::{Scalar, Tensor};

/// Inputs are processed in chunks of this many samples; results do not
/// depend on it because every sample is computed independently.
const CHUNK: usize = 256;

/// Settings of one Monte Carlo prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub passes: usize,
    pub lambda_frozen: usize,
    pub drop_prob: f64,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
    pub seed: u64,
    /// Keep every pass's probabilities in the summary.
    #[serde(default)]
    pub keep_passes: bool,
}

impl McConfig {
    pub fn new(passes: usize, lambda_frozen: usize, drop_prob: f64, seed: u64) -> Self {
        McConfig {
            passes,
            lambda_frozen,
            drop_prob,
            mode: MaskMode::Dropconnect,
            scale_mode: ScaleMode::Inverted,
            seed,
            keep_passes: false,
        }
    }

    pub fn plan(&self) -> Result<MaskPlan> {
        MaskPlan::new(self.drop_prob, self.lambda_frozen, self.mode, self.scale_mode)
    }

    fn validate<T: Scalar>(&self, net: &Network<T>) -> Result<MaskPlan> {
        if self.passes == 0 {
            return Err(Error::config("the number of passes must be at least 1"));
        }
        let plan = self.plan()?;
        plan.validate_for(net)?;
        Ok(plan)
    }
}

/// MC-averaged prediction for a batch of inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSummary {
    /// `[B × C]` mean of the per-pass probability vectors.
    pub mean_probs: Tensor<f64>,
    /// Entropy (nats) of each row of `mean_probs`.
    pub entropy: Vec<f64>,
    /// `passes × [B × C]`, only when requested.
    pub per_pass_probs: Option<Vec<Tensor<f32>>>,
    pub passes: usize,
    pub lambda_frozen: usize,
    pub drop_prob: f64,
    pub mode: MaskMode,
    pub scale_mode: ScaleMode,
    pub seed: u64,
}

impl PredictiveSummary {
    pub fn n_inputs(&self) -> usize {
        self.mean_probs.shape()[0]
    }

    pub fn n_classes(&self) -> usize {
        self.mean_probs.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_classes();
        &self.mean_probs.data()[i * c..(i + 1) * c]
    }

    pub fn mean_entropy(&self) -> f64 {
        self.entropy.iter().sum::<f64>() / self.entropy.len() as f64
    }
}

/// Layer ranges of the frozen prefix and the stochastic tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSplit {
    pub lambda_frozen: usize,
    pub prefix: Range<usize>,
    pub tail: Range<usize>,
}

impl NetworkSplit {
    pub fn prefix_layers<'a, T: Scalar>(&self, net: &'a Network<T>) -> &'a [LayerSpec] {
        &net.layers()[self.prefix.clone()]
    }

    pub fn tail_layers<'a, T: Scalar>(&self, net: &'a Network<T>) -> &'a [LayerSpec] {
        &net.layers()[self.tail.clone()]
    }
}

/// The prefix holds the first `λ` weight layers and the non-weight layers that
/// follow them, up to the next weight layer.
pub fn split_network<T: Scalar>(net: &Network<T>, lambda_frozen: usize) -> Result<NetworkSplit> {
    let b = net.frozen_boundary(lambda_frozen)?;
    Ok(NetworkSplit {
        lambda_frozen,
        prefix: 0..b,
        tail: b..net.layers().len(),
    })
}

/// Boundary activations of the frozen prefix for one batch. Only valid for
/// the network weights, inputs and `λ` it was built from.
#[derive(Clone, Debug)]
pub struct FrozenCache<T = f32> {
    boundary: usize,
    batch: usize,
    activations: Vec<T>,
}

impl<T: Scalar> FrozenCache<T> {
    /// Deterministic, unmasked and unscaled forward through the prefix.
    pub fn build(net: &Network<T>, x: &Tensor<T>, lambda_frozen: usize) -> Result<Self> {
        let boundary = net.frozen_boundary(lambda_frozen)?;
        let batch = batch_of(x, net.input_shape())?;
        let masks = MaskSet::deterministic(net.n_weight_layers());
        let activations = forward_layers(net, 0, boundary, batch, x.data().to_vec(), &masks, None)?;
        Ok(FrozenCache {
            boundary,
            batch,
            activations,
        })
    }

    pub fn boundary_layer_index(&self) -> usize {
        self.boundary
    }

    pub fn activations(&self) -> &[T] {
        &self.activations
    }

    /// Run the tail from the cached activations under `masks`.
    pub fn run_tail(&self, net: &Network<T>, masks: &MaskSet) -> Result<Vec<T>> {
        forward_layers(
            net,
            self.boundary,
            net.layers().len(),
            self.batch,
            self.activations.clone(),
            masks,
            None,
        )
    }
}

/// Accumulates per-pass probabilities in ascending pass order.
struct Accumulator {
    sum: Vec<f64>,
    passes: Vec<Vec<f32>>,
    keep: bool,
}

impl Accumulator {
    fn new(len: usize, keep: bool) -> Self {
        Accumulator {
            sum: vec![0.0; len],
            passes: vec![],
            keep,
        }
    }

    fn add(&mut self, probs: Vec<f32>) {
        for (s, &p) in self.sum.iter_mut().zip(&probs) {
            *s += p as f64;
        }
        if self.keep {
            self.passes.push(probs);
        }
    }
}

fn check_input(net: &Network<f32>, x: &Tensor<f32>) -> Result<usize> {
    batch_of(x, net.input_shape()).map_err(|e| Error::data(e.to_string()))
}

fn summarize(
    net: &Network<f32>,
    cfg: &McConfig,
    batch: usize,
    chunks: Vec<Accumulator>,
) -> Result<PredictiveSummary> {
    let c = net.output_classes();
    let k = cfg.passes as f64;
    let mut mean = Vec::with_capacity(batch * c);
    let mut per_pass: Option<Vec<Vec<f32>>> = cfg.keep_passes.then(|| vec![vec![]; cfg.passes]);
    for acc in chunks {
        mean.extend(acc.sum.iter().map(|s| s / k));
        if let Some(pp) = per_pass.as_mut() {
            for (dst, src) in pp.iter_mut().zip(acc.passes) {
                dst.extend(src);
            }
        }
    }
    let entropy = mean
        .chunks(c)
        .map(predictive_entropy)
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictiveSummary {
        mean_probs: Tensor::new(vec![batch, c], mean)?,
        entropy,
        per_pass_probs: per_pass
            .map(|pp| pp.into_iter().map(|p| Tensor::new(vec![batch, c], p)).collect())
            .transpose()?,
        passes: cfg.passes,
        lambda_frozen: cfg.lambda_frozen,
        drop_prob: cfg.drop_prob,
        mode: cfg.mode,
        scale_mode: cfg.scale_mode,
        seed: cfg.seed,
    })
}

fn chunks_of(x: &Tensor<f32>, batch: usize, single: bool) -> Result<Vec<Tensor<f32>>> {
    if single {
        return Ok(vec![x.clone()]);
    }
    (0..batch)
        .step_by(CHUNK)
        .map(|s| x.slice_outer(s, (s + CHUNK).min(batch)))
        .collect()
}

/// Reference implementation: `passes` full stochastic forward passes with
/// pass indices `0..passes`, averaged in ascending order.
pub fn mc_predict_naive(net: &Network<f32>, x: &Tensor<f32>, cfg: &McConfig) -> Result<PredictiveSummary> {
    let plan = cfg.validate(net)?;
    let batch = check_input(net, x)?;
    let single = x.shape() == net.input_shape();
    let mut accs = vec![];
    for part in chunks_of(x, batch, single)? {
        let mut acc = Accumulator::new(part.len() / net.input_shape().iter().product::<usize>()
            * net.output_classes(), cfg.keep_passes);
        for pass in 0..cfg.passes {
            let masks = MaskSet::sample(net, &plan, cfg.seed, pass as u64)?;
            acc.add(forward_with_masks(net, &part, &masks)?.into_data());
        }
        accs.push(acc);
    }
    summarize(net, cfg, batch, accs)
}

/// Select-DC: the frozen prefix runs once per chunk of inputs, the tail runs
/// `passes` times from the cached boundary activations.
pub fn select_dc_predict(net: &Network<f32>, x: &Tensor<f32>, cfg: &McConfig) -> Result<PredictiveSummary> {
    let plan = cfg.validate(net)?;
    let batch = check_input(net, x)?;
    let single = x.shape() == net.input_shape();
    let mut accs = vec![];
    for part in chunks_of(x, batch, single)? {
        let cache = FrozenCache::build(net, &part, cfg.lambda_frozen)?;
        let mut acc = Accumulator::new(cache.batch * net.output_classes(), cfg.keep_passes);
        for pass in 0..cfg.passes {
            let masks = MaskSet::sample(net, &plan, cfg.seed, pass as u64)?;
            acc.add(cache.run_tail(net, &masks)?);
        }
        accs.push(acc);
    }
    summarize(net, cfg, batch, accs)
}

/// `−Σ p ln p` in nats, with `0 ln 0 = 0`.
pub fn predictive_entropy(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::data("entropy of an empty distribution"));
    }
    if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::data(format!("invalid probability {bad}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-5 {
        return Err(Error::data(format!("probabilities sum to {total}, not 1")));
    }
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // Rounding can push the sum a hair outside the attainable range.
    Ok(h.clamp(0.0, (probs.len() as f64).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{deterministic_forward, LayerSpec};
    use crate::rng::rng_stream;

    pub(crate) fn small_cnn(seed: u64) -> Network<f32> {
        Network::init(
            vec![1, 6, 6],
            vec![
                LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 3,
                    kernel_h: 3,
                    kernel_w: 3,
                    stride: 1,
                    pad: 0,
                },
                LayerSpec::Relu,
                LayerSpec::Maxpool2,
                LayerSpec::Flatten,
                LayerSpec::Dense { fan_in: 12, fan_out: 8 },
                LayerSpec::Relu,
                LayerSpec::Dense { fan_in: 8, fan_out: 6 },
                LayerSpec::Relu,
                LayerSpec::Dense { fan_in: 6, fan_out: 4 },
                LayerSpec::Softmax,
            ],
            seed,
        )
        .unwrap()
    }

    pub(crate) fn inputs(n: usize, seed: u64) -> Tensor<f32> {
        let mut s = rng_stream(seed, 0, 0);
        let data = (0..n * 36).map(|_| s.next_f64() as f32).collect();
        Tensor::new(vec![n, 1, 6, 6], data).unwrap()
    }

    #[test]
    fn split_boundaries() {
        let net = small_cnn(0);
        let s = split_network(&net, 0).unwrap();
        assert_eq!(s.prefix, 0..0);
        let s = split_network(&net, 1).unwrap();
        assert_eq!(s.prefix, 0..4);
        assert_eq!(s.tail_layers(&net)[0], LayerSpec::Dense { fan_in: 12, fan_out: 8 });
        let s = split_network(&net, 4).unwrap();
        assert!(s.tail.is_empty());
        assert!(matches!(split_network(&net, 5), Err(Error::Config(_))));
    }

    #[test]
    fn cached_equals_naive_bitwise() {
        let net = small_cnn(1);
        let x = inputs(5, 2);
        for lambda in 0..=4 {
            for p in [0.0, 0.1, 0.5] {
                let mut cfg = McConfig::new(25, lambda, p, 7);
                cfg.keep_passes = true;
                let a = mc_predict_naive(&net, &x, &cfg).unwrap();
                let b = select_dc_predict(&net, &x, &cfg).unwrap();
                assert_eq!(a, b, "λ={lambda} p={p}");
            }
        }
    }

    #[test]
    fn zero_drop_matches_deterministic() {
        let net = small_cnn(3);
        let x = inputs(3, 4);
        let det = deterministic_forward(&net, &x).unwrap();
        let s = select_dc_predict(&net, &x, &McConfig::new(1, 0, 0.0, 9)).unwrap();
        for (a, b) in s.mean_probs.data().iter().zip(det.data()) {
            assert_eq!(*a, *b as f64);
        }
        let s5 = mc_predict_naive(&net, &x, &McConfig::new(5, 0, 0.0, 9)).unwrap();
        for (e1, e5) in s.entropy.iter().zip(&s5.entropy) {
            assert!((e1 - e5).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_frozen_passes_are_identical() {
        let net = small_cnn(5);
        let x = inputs(2, 6);
        let mut cfg = McConfig::new(4, 4, 0.5, 1);
        cfg.keep_passes = true;
        let s = select_dc_predict(&net, &x, &cfg).unwrap();
        let pp = s.per_pass_probs.unwrap();
        assert!(pp.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn chunking_does_not_change_results() {
        let net = small_cnn(8);
        let x = inputs(CHUNK + 7, 9);
        let cfg = McConfig::new(3, 1, 0.3, 2);
        let all = select_dc_predict(&net, &x, &cfg).unwrap();
        let tail = select_dc_predict(&net, &x.slice_outer(CHUNK, CHUNK + 7).unwrap(), &cfg).unwrap();
        assert_eq!(&all.mean_probs.data()[CHUNK * 4..], tail.mean_probs.data());
    }

    #[test]
    fn records_pass_count_and_bounds() {
        let net = small_cnn(10);
        let s = select_dc_predict(&net, &inputs(4, 1), &McConfig::new(25, 2, 0.2, 3)).unwrap();
        assert_eq!(s.passes, 25);
        for i in 0..4 {
            let sum: f64 = s.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
            assert!(s.entropy[i] >= 0.0 && s.entropy[i] <= 4f64.ln());
        }
    }

    #[test]
    fn entropy_examples() {
        let mut one_hot = vec![0.0; 10];
        one_hot[3] = 1.0;
        assert_eq!(predictive_entropy(&one_hot).unwrap(), 0.0);
        let uniform = vec![0.1; 10];
        assert!((predictive_entropy(&uniform).unwrap() - 10f64.ln()).abs() < 1e-12);
        let split = [0.5, 0.5, 0.0, 0.0];
        assert!((predictive_entropy(&split).unwrap() - 0.693147).abs() < 1e-6);
        assert!(matches!(predictive_entropy(&[0.5, 0.6]), Err(Error::Data(_))));
        assert!(matches!(predictive_entropy(&[1.5, -0.5]), Err(Error::Data(_))));
    }

    #[test]
    fn zero_passes_rejected() {
        let net = small_cnn(0);
        let err = select_dc_predict(&net, &inputs(1, 0), &McConfig::new(0, 0, 0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
