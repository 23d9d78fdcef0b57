//! `key = value` configuration files mirroring the policy and environment
//! config fields. CLI flags override file values.

use crate::{HarnessError, Result};
use hiact_policy::PolicyConfig;
use hiact_sim_env::EnvConfig;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct FileOverrides {
    entries: BTreeMap<String, String>,
}

const POLICY_KEYS: &[&str] = &[
    "chunk_k",
    "d_model",
    "n_heads",
    "n_encoder_layers",
    "n_decoder_layers",
    "ffn_dim",
    "z_dim",
    "beta_kl",
    "haptic_enabled",
    "lr",
    "train_steps",
    "batch_size",
    "rng_seed",
];

const ENV_KEYS: &[&str] = &[
    "n_seeds_min",
    "n_seeds_max",
    "dish_center_jitter",
    "seed_size_multiplier",
    "seed_contrast",
    "p_slip",
    "max_steps",
    "rng_seed",
];

/// Parse `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Keys must belong to the policy or environment config.
pub fn parse(text: &str) -> Result<FileOverrides> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "config line {}: expected key = value, got {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if !POLICY_KEYS.contains(&key.as_str()) && !ENV_KEYS.contains(&key.as_str()) {
            return Err(HarnessError::Config(format!("config line {}: unknown key {key}", lineno + 1)));
        }
        entries.insert(key, value.trim().to_string());
    }
    Ok(FileOverrides { entries })
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("config key {key}: cannot parse {value:?}")))
}

impl FileOverrides {
    pub fn apply_policy(&self, cfg: &mut PolicyConfig) -> Result<()> {
        for (key, value) in &self.entries {
            match key.as_str() {
                "chunk_k" => cfg.chunk_k = parse_as(key, value)?,
                "d_model" => cfg.d_model = parse_as(key, value)?,
                "n_heads" => cfg.n_heads = parse_as(key, value)?,
                "n_encoder_layers" => cfg.n_encoder_layers = parse_as(key, value)?,
                "n_decoder_layers" => cfg.n_decoder_layers = parse_as(key, value)?,
                "ffn_dim" => cfg.ffn_dim = parse_as(key, value)?,
                "z_dim" => cfg.z_dim = parse_as(key, value)?,
                "beta_kl" => cfg.beta_kl = parse_as(key, value)?,
                "haptic_enabled" => cfg.haptic_enabled = parse_as(key, value)?,
                "lr" => cfg.lr = parse_as(key, value)?,
                "train_steps" => cfg.train_steps = parse_as(key, value)?,
                "batch_size" => cfg.batch_size = parse_as(key, value)?,
                "rng_seed" => cfg.rng_seed = parse_as(key, value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn apply_env(&self, cfg: &mut EnvConfig) -> Result<()> {
        for (key, value) in &self.entries {
            match key.as_str() {
                "n_seeds_min" => cfg.n_seeds_range.0 = parse_as(key, value)?,
                "n_seeds_max" => cfg.n_seeds_range.1 = parse_as(key, value)?,
                "dish_center_jitter" => cfg.dish_center_jitter = parse_as(key, value)?,
                "seed_size_multiplier" => cfg.seed_size_multiplier = parse_as(key, value)?,
                "seed_contrast" => cfg.seed_contrast = parse_as(key, value)?,
                "p_slip" => cfg.p_slip = parse_as(key, value)?,
                "max_steps" => cfg.max_steps = parse_as(key, value)?,
                "rng_seed" => cfg.rng_seed = parse_as(key, value)?,
                _ => {}
            }
        }
        Ok(())
    }
}
