//! Supervised training of masked networks.

mod augment;
mod backward;
mod config;
mod fit;
mod loss;
mod optim;
mod schedule;

pub use augment::{augment, flip_horizontal, shift_image};
pub use backward::{compute_gradients, weight_decay_gradients, Gradients};
pub use config::TrainConfig;
pub use fit::{evaluate_accuracy, fit, fit_with, EpochMetrics, FitReport};
pub use loss::{loss_mc, nll_term, weight_decay_term, PROB_FLOOR};
pub use optim::{nesterov_update, sgd_nesterov_step, OptimizerState};
pub use schedule::lr_at;
