//! Planar pseudo-oocyte transfer environment.
//!
//! A dish of seeds, four target tubes, a rate-limited gripper with a
//! compliant (saturating) force model, stochastic slip at lift, and a
//! low-resolution top-down rendering in which a closed gripper occludes
//! its contents — vision alone cannot confirm a grasp.
//!
//! Everything is deterministic given an [`EnvConfig`]: one ChaCha stream
//! drives dish jitter, seed placement, slip draws, and force noise in a
//! fixed order, so replaying a recorded action sequence reproduces the
//! episode bit for bit.

mod config;
mod env;
mod force;
mod render;
mod types;

pub use config::EnvConfig;
pub use env::{Env, EnvState, Seed, SeedPlace};
pub use force::{expected_force, force_readout};
pub use render::render_image;
pub use types::{Action, ActionChunk, EventFlags, Observation, IMAGE_SIZE, IMAGE_PIXELS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),

    #[error("seed placement failed after {attempts} rejection samples (dish too crowded)")]
    CrowdedDish { attempts: usize },

    #[error("step called after episode_done")]
    EpisodeDone,
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Workspace geometry and physics constants (unit workspace).
pub mod geometry {
    /// Dish center before jitter.
    pub const DISH_CENTER: [f64; 2] = [0.5, 0.45];
    pub const DISH_RADIUS: f64 = 0.18;
    /// Tube x positions; all tubes sit at [`TUBE_Y`].
    pub const TUBE_XS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
    pub const TUBE_Y: f64 = 0.9;
    pub const TUBE_RADIUS: f64 = 0.03;
    pub const GRIPPER_START: [f64; 2] = [0.5, 0.15];
    pub const SEED_BASE_DIAMETER: f64 = 0.03;
    /// Per-step position rate limit (x, y, z).
    pub const RATE_POS: f64 = 0.05;
    /// Per-step aperture rate limit.
    pub const RATE_APERTURE: f64 = 0.1;
    /// Grasp and release require the gripper below this height.
    pub const GRASP_Z: f64 = 0.2;
    /// Slip is drawn when z crosses this height upward while holding.
    pub const LIFT_Z: f64 = 0.5;
    /// Physical finger gap is `APERTURE_SCALE * g`.
    pub const APERTURE_SCALE: f64 = 0.08;
    /// Contact stiffness of the compliant fingers.
    pub const FORCE_STIFFNESS: f64 = 25.0;
    /// Saturation force of the soft fingers; closing fully never crushes.
    pub const FORCE_CAP: f64 = 2.0;
    /// Finger-on-finger force when closed empty.
    pub const SELF_CONTACT_FORCE: f64 = 0.15;
    /// Physical gap below which empty fingers touch each other.
    pub const SELF_CONTACT_GAP: f64 = 0.002;
    pub const FORCE_NOISE_SIGMA: f64 = 0.02;
    /// A slipped seed lands within this offset of the gripper.
    pub const SLIP_PERTURB: f64 = 0.03;

    pub fn tube_position(index: usize) -> [f64; 2] {
        [TUBE_XS[index], TUBE_Y]
    }
}
