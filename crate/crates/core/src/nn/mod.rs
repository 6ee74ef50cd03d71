//! Layers, networks, masks and the DropConnect / Dropout forward passes.

mod forward;
mod layer;
mod mask;
mod network;
pub mod serialize;

pub use forward::{
    deterministic_forward, dropconnect_forward, dropout_forward, forward_batch,
    forward_with_masks, network_forward,
};
pub(crate) use forward::{batch_of, forward_layers, forward_traced, Saved};
pub use layer::{default_cnn_decls, resolve_layers, Activation, LayerDecl, LayerSpec};
pub use mask::{sample_mask, LayerNoise, Mask, MaskMode, MaskPlan, MaskSet, ScaleMode};
pub use network::{LayerParams, Network};
pub use serialize::{load_model, save_model};
