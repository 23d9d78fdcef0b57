use crate::{PolicyError, Result};
use serde::{Deserialize, Serialize};

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Prediction horizon: actions emitted per forward pass.
    pub chunk_k: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub ffn_dim: usize,
    pub z_dim: usize,
    /// Weight of the KL term in the training objective.
    pub beta_kl: f64,
    /// When false the force token is omitted from the encoder input.
    pub haptic_enabled: bool,
    pub lr: f64,
    pub train_steps: u32,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            chunk_k: 10,
            d_model: 64,
            n_heads: 4,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            ffn_dim: 128,
            z_dim: 16,
            beta_kl: 10.0,
            haptic_enabled: true,
            lr: 1e-3,
            train_steps: 3000,
            batch_size: 8,
            rng_seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_k == 0 {
            return Err(PolicyError::ConfigMismatch("chunk_k must be >= 1".into()));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(PolicyError::ConfigMismatch(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.z_dim == 0 || self.ffn_dim == 0 || self.batch_size == 0 {
            return Err(PolicyError::ConfigMismatch(
                "z_dim, ffn_dim, batch_size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Encoder tokens: 16 image patches + proprio + latent, plus force
    /// when the haptic channel is enabled.
    pub fn token_count(&self) -> usize {
        if self.haptic_enabled {
            19
        } else {
            18
        }
    }
}
