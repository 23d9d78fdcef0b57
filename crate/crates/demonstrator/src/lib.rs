//! Scripted expert demonstrations and dataset persistence.
//!
//! The expert is a finite-state machine that verifies its grasps through
//! the force channel: after lifting it compares the sensed z-force against
//! a threshold and either transports to the target tube or reopens and
//! retries. Recovery demonstrations are staged by forcing the first lift
//! to slip. Datasets persist as one binary file per episode plus a JSON
//! manifest with per-file checksums; saves are byte-reproducible.

mod dataset;
mod episode;
mod expert;
mod io;

pub use dataset::{build_dataset, Dataset, PAPER_PROFILE, SCALED_PROFILE};
pub use episode::{generate_episode, verify_replay, Episode, StepRecord};
pub use expert::{expert_action, ExpertPhase, ScriptedExpert, THETA_GRASP};
pub use io::{load_dataset, save_dataset, FORMAT_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("episode generation failed: {discards} consecutive rollouts missed delivery")]
    Generation { discards: u32 },

    #[error("dataset format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch in {file}")]
    Checksum { file: String },

    #[error("truncated episode file {file}: expected {expected} bytes, found {found}")]
    Truncated { file: String, expected: usize, found: usize },

    #[error("bad magic in {file}")]
    BadMagic { file: String },

    #[error("manifest inconsistent: {0}")]
    ManifestMismatch(String),

    #[error("replay diverged at step {step}")]
    ReplayDiverged { step: usize },

    #[error(transparent)]
    Env(#[from] hiact_sim_env::EnvError),

    #[error(transparent)]
    Control(#[from] hiact_controller::ControlError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("manifest parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;
