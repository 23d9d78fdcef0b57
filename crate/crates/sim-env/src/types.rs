use serde::{Deserialize, Serialize};

/// Side length of the rendered observation grid.
pub const IMAGE_SIZE: usize = 32;
pub const IMAGE_PIXELS: usize = IMAGE_SIZE * IMAGE_SIZE;

/// One timestep of sensing: top-down image, 3-axis force, gripper pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Row-major 32x32 grayscale in [0, 1].
    pub image: Vec<f64>,
    /// (f_x, f_y, f_z) in normalized force units, noise included.
    pub force: [f64; 3],
    /// Gripper pose (x, y, z, g) at render time.
    pub proprio: [f64; 4],
}

/// Absolute target pose; every component is clamped to [0, 1] on ingestion
/// (non-finite inputs map to 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub g: f64,
}

impl Action {
    pub fn new(x: f64, y: f64, z: f64, g: f64) -> Self {
        let clamp = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        Action { x: clamp(x), y: clamp(y), z: clamp(z), g: clamp(g) }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.g]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Action::new(a[0], a[1], a[2], a[3])
    }
}

/// k-step block of target poses predicted in one forward pass.
pub type ActionChunk = Vec<Action>;

/// Episode-cumulative event record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventFlags {
    pub grasp_acquired: bool,
    pub slip_occurred: bool,
    pub pick_success: bool,
    pub delivery_success: bool,
    pub episode_done: bool,
    pub grasp_attempts: u32,
}
