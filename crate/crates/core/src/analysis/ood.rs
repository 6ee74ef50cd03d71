use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{select_dc_predict, McConfig, PredictiveSummary};
use crate::nn::Network;
use crate::tensor::Tensor;

use super::metrics::accuracy;
use super::roc::{auroc, roc_curve, RocPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub id_mean_entropy: f64,
    pub ood_mean_entropy: f64,
    pub auroc: f64,
    /// MC-mean accuracy on the in-distribution set, when labels were given.
    pub id_accuracy: Option<f64>,
    pub threshold_curve: Vec<RocPoint>,
    pub lambda_frozen: usize,
    pub drop_prob: f64,
    pub passes: usize,
    pub seed: u64,
}

/// Score both sets by predictive entropy under Select-DC and measure how well
/// the score separates them.
pub fn ood_evaluate(
    net: &Network<f32>,
    id_images: &Tensor<f32>,
    id_labels: Option<&[usize]>,
    ood_images: &Tensor<f32>,
    cfg: &McConfig,
) -> Result<OodReport> {
    for (name, x) in [("in-distribution", id_images), ("out-of-distribution", ood_images)] {
        if x.shape().len() != net.input_shape().len() + 1 || &x.shape()[1..] != net.input_shape() {
            return Err(Error::data(format!(
                "{name} images have shape {:?}; the network expects [N, {:?}]",
                x.shape(),
                net.input_shape()
            )));
        }
    }
    let id: PredictiveSummary = select_dc_predict(net, id_images, cfg)?;
    let ood = select_dc_predict(net, ood_images, cfg)?;
    Ok(OodReport {
        id_mean_entropy: id.mean_entropy(),
        ood_mean_entropy: ood.mean_entropy(),
        auroc: auroc(&id.entropy, &ood.entropy)?,
        id_accuracy: id_labels.map(|l| accuracy(&id.mean_probs, l)).transpose()?,
        threshold_curve: roc_curve(&id.entropy, &ood.entropy)?,
        lambda_frozen: cfg.lambda_frozen,
        drop_prob: cfg.drop_prob,
        passes: cfg.passes,
        seed: cfg.seed,
    })
}
