//! Minimal dense-tensor math with reverse-mode automatic differentiation.
//!
//! Everything runs on a [`Tape`]: leaves hold inputs and parameters,
//! every operation appends a node, and [`Tape::backward`] walks the
//! recording in reverse to accumulate gradients into `requires_grad`
//! leaves. An [`AdamState`] optimizer and a central-finite-difference
//! [`gradient_check`] round out what a small training loop needs.
//!
//! The engine is generic over the scalar type through [`Scalar`];
//! training code uses the 64-bit aliases at the crate root.

mod adam;
mod attention;
mod error;
mod gradcheck;
mod scalar;
mod tape;

pub use adam::{adam_step, AdamParams, AdamState};
pub use attention::{multi_head_attention, AttentionWeights};
pub use error::TensorError;
pub use gradcheck::gradient_check;
pub use scalar::Scalar;
pub use tape::{Axis, Tape, TensorId};

/// Scalar type used by all training mathematics.
pub type Real = f64;

/// Tape specialized to the training scalar.
pub type Tape64 = Tape<f64>;

pub type Result<T> = std::result::Result<T, TensorError>;
