//! Select-DC: Monte Carlo DropConnect restricted to the trailing layers of a
//! network, with the deterministic leading block evaluated once and cached.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] and [`rng`]: dense kernels and keyed random streams.
//! * [`nn`]: layer specs, networks, masks and stochastic forward passes.
//! * [`train`]: loss, backpropagation, Nesterov SGD, augmentation, `fit`.
//! * [`mc`]: naive and cached Monte Carlo prediction, entropy, rotation probe.
//! * [`analysis`]: FLOPs model, accuracy / NLL / AUROC, OOD evaluation.
//! * [`data`], [`config`], [`results`], [`harness`]: experiment plumbing.

pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod mc;
pub mod nn;
pub mod results;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
