//! Experiment drivers shared by the command-line tool and the tests. Each
//! driver returns [`ResultRecord`]s ready for [`crate::results::emit_results`].

use std::time::Instant;

use crate::analysis::{accuracy, nll, ood_evaluate, total_flops, CostModel, OodReport};
use crate::config::{ExperimentConfig, InferenceConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mc::{rotation_entropy_sweep, select_dc_predict, McConfig, RotationPoint};
use crate::nn::Network;
use crate::results::ResultRecord;
use crate::rng::mix_seed;
use crate::train::{fit_with, EpochMetrics, FitReport};

/// Build a freshly initialised network for `train` and fit it.
pub fn run_train(
    cfg: &ExperimentConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Network<f32>, FitReport)> {
    let layers = cfg.layers(train.sample_shape(), train.n_classes())?;
    let mut net = Network::init(train.sample_shape().to_vec(), layers, cfg.train.seed)?;
    let report = fit_with(&mut net, train, val, &cfg.train, on_epoch)?;
    Ok((net, report))
}

fn elapsed_ms(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn check_compatible(net: &Network<f32>, data: &Dataset) -> Result<()> {
    if data.sample_shape() != net.input_shape() {
        return Err(Error::data(format!(
            "samples have shape {:?}, the model expects {:?}",
            data.sample_shape(),
            net.input_shape()
        )));
    }
    if data.n_classes() > net.output_classes() {
        return Err(Error::data(format!(
            "labels reach class {} but the model has {} outputs",
            data.n_classes() - 1,
            net.output_classes()
        )));
    }
    Ok(())
}

/// Select-DC prediction on a labelled set, summarised as one record.
pub fn predict_record(
    net: &Network<f32>,
    data: &Dataset,
    mc: &McConfig,
    cost_model: CostModel,
) -> Result<ResultRecord> {
    check_compatible(net, data)?;
    let t = Instant::now();
    let s = select_dc_predict(net, data.images(), mc)?;
    let wall = elapsed_ms(t);
    let mean = s.mean_entropy();
    let var = s.entropy.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / s.entropy.len() as f64;
    let mut r = ResultRecord::new("predict", mc);
    r.n_inputs = Some(data.len());
    r.accuracy = Some(accuracy(&s.mean_probs, data.labels())?);
    r.nll = Some(nll(&s.mean_probs, data.labels())?);
    r.mean_entropy = Some(mean);
    r.std_entropy = Some(var.sqrt());
    r.set_flops(&total_flops(net, mc.lambda_frozen, mc.passes, cost_model)?);
    r.wall_time_ms = Some(wall);
    Ok(r)
}

/// Every `(λ, p)` pair of the inference config, λ-major. Entry `i` uses seed
/// `mix_seed(inference.seed, i)`, so entries are independent of run order.
pub fn sweep_configs(inf: &InferenceConfig) -> Vec<McConfig> {
    let mut out = vec![];
    for &lambda in &inf.lambdas {
        for &p in &inf.drop_probs {
            let i = out.len() as u64;
            out.push(inf.mc(lambda, p, mix_seed(inf.seed, i)));
        }
    }
    out
}

pub fn run_sweep(net: &Network<f32>, data: &Dataset, inf: &InferenceConfig) -> Result<Vec<ResultRecord>> {
    sweep_configs(inf)
        .iter()
        .map(|mc| {
            let mut r = predict_record(net, data, mc, inf.cost_model)?;
            r.command = "sweep".into();
            Ok(r)
        })
        .collect()
}

/// Re-run the measurement described by a record's configuration echo.
pub fn replay(
    record: &ResultRecord,
    net: &Network<f32>,
    data: &Dataset,
    cost_model: CostModel,
) -> Result<ResultRecord> {
    let mut r = predict_record(net, data, &record.mc_config(), cost_model)?;
    r.command = record.command.clone();
    Ok(r)
}

/// OOD evaluation for one inference setting; returns the record and the full
/// report (which carries the ROC curve).
pub fn ood_record(
    net: &Network<f32>,
    id: &Dataset,
    ood: &Dataset,
    mc: &McConfig,
    cost_model: CostModel,
) -> Result<(ResultRecord, OodReport)> {
    check_compatible(net, id)?;
    let t = Instant::now();
    let report = ood_evaluate(net, id.images(), Some(id.labels()), ood.images(), mc)?;
    let mut r = ResultRecord::new("ood", mc);
    r.n_inputs = Some(id.len() + ood.len());
    r.accuracy = report.id_accuracy;
    r.id_mean_entropy = Some(report.id_mean_entropy);
    r.ood_mean_entropy = Some(report.ood_mean_entropy);
    r.auroc = Some(report.auroc);
    r.set_flops(&total_flops(net, mc.lambda_frozen, mc.passes, cost_model)?);
    r.wall_time_ms = Some(elapsed_ms(t));
    Ok((r, report))
}

/// Cost table over the given λ values.
pub fn run_flops(
    net: &Network<f32>,
    lambdas: &[usize],
    inf: &InferenceConfig,
) -> Result<Vec<ResultRecord>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mc = inf.mc(lambda, inf.drop_probs[0], inf.seed);
            let mut r = ResultRecord::new("flops", &mc);
            r.set_flops(&total_flops(net, lambda, inf.passes, inf.cost_model)?);
            Ok(r)
        })
        .collect()
}

/// Mean and spread of predictive entropy per rotation angle.
pub fn run_rotate(
    net: &Network<f32>,
    data: &Dataset,
    angles: &[f64],
    mc: &McConfig,
) -> Result<(Vec<ResultRecord>, Vec<RotationPoint>)> {
    check_compatible(net, data)?;
    let points = rotation_entropy_sweep(net, data.images(), Some(data.labels()), angles, mc)?;
    let records = points
        .iter()
        .map(|p| {
            let mut r = ResultRecord::new("rotate", mc);
            r.n_inputs = Some(data.len());
            r.angle = Some(p.angle);
            r.mean_entropy = Some(p.mean_entropy);
            r.std_entropy = Some(p.std_entropy);
            r.accuracy = p.accuracy;
            r
        })
        .collect();
    Ok((records, points))
}
