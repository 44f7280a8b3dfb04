//! Deterministic feedforward network engine.
//!
//! Layers are dense, conv2d (no padding), relu and flatten. Every
//! parameterized layer except the output counts as one depth of the
//! activation profile unless [`DepthSelection::include_output`] is set.

mod backprop;
mod checkpoint;
mod layer;
mod network;
pub(crate) mod ops;
mod optim;
mod train;

pub use backprop::{backward, cross_entropy, Gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layer::LayerSpec;
pub use network::{
    argmax, build_network, build_network_with, ActivationTrace, Aggregation, DepthSelection,
    Network, Params,
};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{
    epoch_order, evaluate, train_epoch, train_epoch_observed, EpochStats, Evaluation, StepInfo,
    EVAL_CHUNK,
};
