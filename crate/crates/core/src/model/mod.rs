//! Decoder-only transformer over the concatenated point-cloud and molecule
//! sequence, with seven classification heads (token, x, y, z, l, θ, φ).
//! Gradients are derived by hand for this fixed architecture.

mod batch;
mod checkpoint;
mod config;
mod forward;
mod infer;
mod linalg;
mod optim;
mod params;
mod train;

use thiserror::Error;

pub use batch::{EncodedBatch, EncodedExample, Targets};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use config::ModelConfig;
pub use forward::{forward_logits, loss_and_grad, LossReport};
pub use infer::{HeadLogits, InferenceState};
pub use linalg::log_softmax;
pub use optim::{AdamW, Schedule};
pub use params::{Layout, ModelParams, TensorClass, TensorInfo, HEAD_NAMES};
pub use train::{train, TrainConfig, TrainLog, TrainStep};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("sequence of {len} positions exceeds n_ctx = {n_ctx}")]
    Context { len: usize, n_ctx: usize },
    #[error("position {position}: id outside its embedding table or head")]
    Index { position: usize },
    #[error("batch has no unmasked targets")]
    EmptyBatch,
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
