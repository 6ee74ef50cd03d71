//! The training loop.

use serde::{Deserialize, Serialize};

use crate::analysis::argmax;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{deterministic_forward, MaskSet, Network};
use crate::rng::{mix_seed, rng_stream};
use crate::tensor::Tensor;

use super::augment::augment;
use super::backward::compute_gradients;
use super::config::TrainConfig;
use super::optim::{sgd_nesterov_step, OptimizerState};
use super::schedule::lr_at;

const SHUFFLE_LABEL: u64 = 0x5348;
const AUGMENT_LABEL: u64 = 0x4147;
const MASK_LABEL: u64 = 0x4d41;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean mini-batch loss, including the weight-decay term.
    pub train_loss: f64,
    /// Accuracy of the stochastic training passes.
    pub train_accuracy: f64,
    /// Deterministic-forward accuracy on the validation set, if one was given.
    pub val_accuracy: Option<f64>,
    pub final_lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochMetrics>,
}

/// Train `net` in place. See [`fit_with`] for a per-epoch callback.
pub fn fit(
    net: &mut Network<f32>,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<FitReport> {
    fit_with(net, train, val, cfg, |_| {})
}

/// Shuffled mini-batch training. Each step augments the batch, samples one
/// mask set for the layers outside the training-time frozen prefix, runs a
/// forward and backward pass and applies a Nesterov update. Everything random
/// is drawn from streams derived from `cfg.seed`, so two runs with the same
/// configuration produce bit-identical weights.
pub fn fit_with(
    net: &mut Network<f32>,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<FitReport> {
    cfg.validate()?;
    let plan = cfg.mask_plan()?;
    plan.validate_for(net)?;
    if train.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    if train.sample_shape() != net.input_shape() {
        return Err(Error::data(format!(
            "training samples have shape {:?}, network expects {:?}",
            train.sample_shape(),
            net.input_shape()
        )));
    }
    if train.n_classes() > net.output_classes() {
        return Err(Error::data(format!(
            "{} classes in the data but the network has {} outputs",
            train.n_classes(),
            net.output_classes()
        )));
    }
    let augmenting = cfg.shift_max > 0 || cfg.flip_prob > 0.0;
    if augmenting && train.sample_shape().len() != 3 {
        return Err(Error::config(
            "augmentation needs C×H×W samples; set shift_max = 0 and flip_prob = 0",
        ));
    }

    let n = train.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let shuffle_seed = mix_seed(cfg.seed, SHUFFLE_LABEL);
    let augment_seed = mix_seed(cfg.seed, AUGMENT_LABEL);
    let mask_seed = mix_seed(cfg.seed, MASK_LABEL);
    let mut state = OptimizerState::new(net.params());
    let mut report = FitReport::default();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng_stream(shuffle_seed, epoch as u64, 0).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut lr = cfg.lr_peak;
        for chunk in order.chunks(cfg.batch_size) {
            let (mut x, labels) = train.gather(chunk)?;
            if augmenting {
                x = augment_batch(&x, cfg, augment_seed, step as u64)?;
            }
            let masks = MaskSet::sample(net, &plan, mask_seed, step as u64)?;
            let (loss, grads, probs) = compute_gradients(net, &x, &labels, &masks, cfg.weight_decay)
                .map_err(|e| diagnose(e, epoch, step))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss became {loss} at epoch {epoch}, step {step}; \
                     try a lower lr_peak (currently {})",
                    cfg.lr_peak
                )));
            }
            lr = lr_at(step, total_steps, cfg);
            sgd_nesterov_step(net.params_mut(), &grads, &mut state, lr, cfg.momentum);
            loss_sum += loss * labels.len() as f64;
            let classes = net.output_classes();
            correct += probs
                .data()
                .chunks(classes)
                .zip(&labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            step += 1;
        }
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            val_accuracy: val.map(|v| evaluate_accuracy(net, v)).transpose()?,
            final_lr: lr,
        };
        on_epoch(&metrics);
        report.epochs.push(metrics);
    }
    Ok(report)
}

fn augment_batch(x: &Tensor<f32>, cfg: &TrainConfig, seed: u64, step: u64) -> Result<Tensor<f32>> {
    let b = x.shape()[0];
    let sample: Vec<usize> = x.shape()[1..].to_vec();
    let per = x.len() / b;
    let mut out = Vec::with_capacity(x.len());
    for k in 0..b {
        let img = Tensor::new(sample.clone(), x.data()[k * per..(k + 1) * per].to_vec())?;
        let mut stream = rng_stream(seed, step, k as u64);
        out.extend_from_slice(augment(&img, cfg.shift_max, cfg.flip_prob, &mut stream)?.data());
    }
    Tensor::new(x.shape().to_vec(), out)
}

fn diagnose(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{m} (epoch {epoch}, step {step})")),
        other => other,
    }
}

/// Deterministic-forward accuracy, evaluated in chunks of 500 samples.
pub fn evaluate_accuracy(net: &Network<f32>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::data("evaluation set is empty"));
    }
    let classes = net.output_classes();
    let mut correct = 0usize;
    let mut start = 0;
    while start < data.len() {
        let end = (start + 500).min(data.len());
        let part = data.slice(start, end)?;
        let probs = deterministic_forward(net, part.images())?;
        correct += probs
            .data()
            .chunks(classes)
            .zip(part.labels())
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        start = end;
    }
    Ok(correct as f64 / data.len() as f64)
}
