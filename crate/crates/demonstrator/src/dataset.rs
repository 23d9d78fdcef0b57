use crate::episode::{generate_episode, Episode};
use crate::Result;
use hiact_sim_env::EnvConfig;

/// The hardware study's demonstration counts: 40 successful, 10 recovery.
pub const PAPER_PROFILE: (u32, u32) = (40, 10);
/// Default training profile: counts scaled by four, same 20% recovery ratio.
pub const SCALED_PROFILE: (u32, u32) = (160, 40);

/// An ordered collection of demonstrations: success episodes first, then
/// recovery episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub n_success: u32,
    pub n_recovery: u32,
    pub base_seed: u64,
    /// Rollouts discarded for missing delivery during generation.
    pub total_discards: u32,
}

impl Dataset {
    pub fn recovery_fraction(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.n_recovery as f64 / (self.n_success + self.n_recovery) as f64
    }

    /// The same demonstrations with the recovery episodes removed; the
    /// ablation trains on an identical success pool.
    pub fn without_recovery(&self) -> Dataset {
        Dataset {
            episodes: self.episodes.iter().filter(|e| !e.is_recovery).cloned().collect(),
            n_success: self.n_success,
            n_recovery: 0,
            base_seed: self.base_seed,
            total_discards: self.total_discards,
        }
    }
}

/// Collect `n_success` clean and `n_recovery` staged-slip demonstrations.
///
/// Collection runs with `p_slip = 0` so composition is exact: success
/// episodes deliver on the first grasp, recovery episodes fail exactly the
/// first grasp and retry. Target tubes cycle over all four within each
/// group; episode `i` (success first, recovery after) uses RNG seed
/// `base_seed XOR i`. The result is a pure function of the arguments.
pub fn build_dataset(n_success: u32, n_recovery: u32, base_seed: u64) -> Result<Dataset> {
    let mut episodes = Vec::with_capacity((n_success + n_recovery) as usize);
    let mut total_discards = 0;
    for i in 0..(n_success + n_recovery) {
        let is_recovery = i >= n_success;
        let cycle = if is_recovery { i - n_success } else { i };
        let config = EnvConfig {
            p_slip: 0.0,
            rng_seed: base_seed ^ i as u64,
            target_tube: Some((cycle % 4) as u8),
            ..EnvConfig::default()
        };
        let (episode, discards) = generate_episode(&config, is_recovery)?;
        total_discards += discards;
        episodes.push(episode);
    }
    Ok(Dataset { episodes, n_success, n_recovery, base_seed, total_discards })
}
