//! The haptic-informed action-chunking policy.
//!
//! Observations tokenize into 16 image-patch tokens, one proprioception
//! token, one force token (dropped entirely in the no-haptic ablation so
//! the model structurally cannot read force), and one latent slot. A
//! transformer encoder reads the tokens, a decoder cross-attends k learned
//! queries to the encoder output, and an action head emits a k-step chunk
//! of target poses. A CVAE encoder over (target chunk, proprioception)
//! supplies the latent during training; inference uses the prior mean
//! z = 0.

mod config;
mod driver;
mod model;
mod params;
mod train;

pub use config::PolicyConfig;
pub use driver::ChunkPolicyDriver;
pub use model::{
    cvae_encode, forward, loss, predict, reparameterize, sample_latent, tokenize, ModelIds,
    PolicySession,
};
pub use params::{checkpoint_bytes, load_checkpoint, save_checkpoint, ModelParams, CHECKPOINT_VERSION};
pub use train::{sample_training_batch, train, StepLoss, TrainLog};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Tensor(#[from] hiact_tensor_core::TensorError),

    #[error("training requires a non-empty dataset")]
    EmptyDataset,

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: u32 },

    #[error("bad magic in checkpoint {0}")]
    BadMagic(String),

    #[error("checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated checkpoint {0}")]
    Truncated(String),

    #[error("checkpoint does not match its config: {0}")]
    ConfigMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PolicyError>;
