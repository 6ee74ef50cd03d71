use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};
use crate::tensor::Scalar;

/// How a layer's cost is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Analytic floating-point operation counts.
    #[default]
    Flops,
    /// One unit per weight-bearing layer, nothing for the rest.
    Uniform,
}

impl std::str::FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flops" => Ok(CostModel::Flops),
            "uniform" => Ok(CostModel::Uniform),
            _ => Err(Error::config(format!("unknown cost model `{s}` (flops|uniform)"))),
        }
    }
}

/// Cost of one layer applied to one input of shape `input`.
///
/// Multiply-accumulates count as two operations: dense layers cost
/// `2·fan_in·fan_out`, convolutions `2·kh·kw·C_in·C_out·H'·W'`. Bias adds are
/// not counted. Activation, pooling, flatten and softmax cost one operation
/// per output element.
pub fn layer_cost(layer: &LayerSpec, input: &[usize]) -> Result<u64> {
    let out = layer
        .output_shape(input)
        .map_err(|e| Error::config(format!("cannot cost {} layer: {e}", layer.name())))?;
    let elems = out.iter().product::<usize>() as u64;
    Ok(match *layer {
        LayerSpec::Dense { fan_in, fan_out } => 2 * fan_in as u64 * fan_out as u64,
        LayerSpec::Conv2d {
            in_channels,
            kernel_h,
            kernel_w,
            ..
        } => 2 * (kernel_h * kernel_w * in_channels) as u64 * elems,
        _ => elems,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub kind: String,
    pub cost: u64,
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub cost_model: CostModel,
    pub per_layer: Vec<LayerCost>,
    pub n_weight_layers: usize,
    pub lambda_frozen: usize,
    pub passes: usize,
    /// Cost of the frozen prefix, paid once.
    pub frozen_total: u64,
    /// Cost of one pass through the stochastic tail.
    pub stochastic_total: u64,
    /// `frozen_total + passes · stochastic_total`.
    pub grand_total: u64,
}

/// Cost of a Select-DC prediction for one input with `passes` passes.
pub fn total_flops<T: Scalar>(
    net: &Network<T>,
    lambda_frozen: usize,
    passes: usize,
    model: CostModel,
) -> Result<FlopsReport> {
    if passes == 0 {
        return Err(Error::config("the number of passes must be at least 1"));
    }
    let boundary = net.frozen_boundary(lambda_frozen)?;
    let mut per_layer = Vec::with_capacity(net.layers().len());
    let (mut frozen_total, mut stochastic_total) = (0u64, 0u64);
    for (i, layer) in net.layers().iter().enumerate() {
        let cost = match model {
            CostModel::Flops => layer_cost(layer, net.shape_at(i))?,
            CostModel::Uniform => u64::from(layer.is_weight_bearing()),
        };
        let frozen = i < boundary;
        if frozen {
            frozen_total += cost;
        } else {
            stochastic_total += cost;
        }
        per_layer.push(LayerCost {
            index: i,
            kind: layer.name().to_string(),
            cost,
            frozen,
        });
    }
    Ok(FlopsReport {
        cost_model: model,
        per_layer,
        n_weight_layers: net.n_weight_layers(),
        lambda_frozen,
        passes,
        frozen_total,
        stochastic_total,
        grand_total: frozen_total + passes as u64 * stochastic_total,
    })
}

/// Closed form for `n` layers of equal cost `m`, `lambda` of them frozen:
/// `lambda·m + (n − lambda)·m·passes`.
pub fn uniform_cost(n: u64, lambda: u64, passes: u64, m: u64) -> u64 {
    lambda * m + (n - lambda) * m * passes
}
