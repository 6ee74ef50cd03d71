//! Metrics, ROC analysis, out-of-distribution evaluation and the analytic
//! inference cost model.

mod flops;
mod metrics;
mod ood;
mod roc;

pub use flops::{layer_cost, total_flops, uniform_cost, CostModel, FlopsReport, LayerCost};
pub use metrics::{accuracy, argmax, nll};
pub use ood::{ood_evaluate, OodReport};
pub use roc::{auroc, roc_curve, trapezoid_area, RocPoint};
