use crate::{EnvError, Result};
use serde::{Deserialize, Serialize};

/// Everything that varies between episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Inclusive range the seed count is drawn from.
    pub n_seeds_range: (u32, u32),
    /// Dish center jitter half-width in workspace units.
    pub dish_center_jitter: f64,
    /// Seed diameter multiplier relative to the 0.03-unit default.
    pub seed_size_multiplier: f64,
    /// Rendered seed contrast in (0, 1].
    pub seed_contrast: f64,
    /// Probability a lift sheds the held seed.
    pub p_slip: f64,
    pub max_steps: u32,
    pub rng_seed: u64,
    /// Fixed target tube; `None` draws uniformly from the four tubes.
    pub target_tube: Option<u8>,
    /// Force the first lift of the episode to slip, overriding `p_slip`.
    pub force_first_slip: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_seeds_range: (1, 7),
            dish_center_jitter: 0.05,
            seed_size_multiplier: 1.0,
            seed_contrast: 1.0,
            p_slip: 0.3,
            max_steps: 125,
            rng_seed: 0,
            target_tube: None,
            force_first_slip: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_seeds_range;
        if lo < 1 || lo > hi {
            return Err(EnvError::InvalidConfig(format!(
                "n_seeds_range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
            )));
        }
        if !(0.0..=1.0).contains(&self.p_slip) {
            return Err(EnvError::InvalidConfig(format!("p_slip {} outside [0,1]", self.p_slip)));
        }
        if self.seed_size_multiplier <= 0.0 {
            return Err(EnvError::InvalidConfig("seed_size_multiplier must be positive".into()));
        }
        if !(0.0 < self.seed_contrast && self.seed_contrast <= 1.0) {
            return Err(EnvError::InvalidConfig(format!(
                "seed_contrast {} outside (0,1]",
                self.seed_contrast
            )));
        }
        if self.dish_center_jitter < 0.0 {
            return Err(EnvError::InvalidConfig("dish_center_jitter must be >= 0".into()));
        }
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be >= 1".into()));
        }
        if let Some(t) = self.target_tube {
            if t > 3 {
                return Err(EnvError::InvalidConfig(format!("target_tube {t} outside 0..4")));
            }
        }
        Ok(())
    }
}
