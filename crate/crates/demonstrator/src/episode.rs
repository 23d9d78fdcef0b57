use crate::expert::ScriptedExpert;
use crate::{DataError, Result};
use hiact_controller::{rollout, RolloutTrace};
use hiact_sim_env::{Action, Env, EnvConfig, Observation, IMAGE_PIXELS};

/// One recorded timestep, at the 32-bit precision of the on-disk format.
/// The observation is the one the action was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub image: Vec<f32>,
    pub force: [f32; 3],
    pub proprio: [f32; 4],
    pub action: [f32; 4],
}

impl StepRecord {
    fn from_parts(obs: &Observation, action: Action) -> Self {
        let a = action.as_array();
        StepRecord {
            image: obs.image.iter().map(|&v| v as f32).collect(),
            force: [obs.force[0] as f32, obs.force[1] as f32, obs.force[2] as f32],
            proprio: [
                obs.proprio[0] as f32,
                obs.proprio[1] as f32,
                obs.proprio[2] as f32,
                obs.proprio[3] as f32,
            ],
            action: [a[0] as f32, a[1] as f32, a[2] as f32, a[3] as f32],
        }
    }

    pub fn observation(&self) -> Observation {
        Observation {
            image: self.image.iter().map(|&v| v as f64).collect(),
            force: [self.force[0] as f64, self.force[1] as f64, self.force[2] as f64],
            proprio: [
                self.proprio[0] as f64,
                self.proprio[1] as f64,
                self.proprio[2] as f64,
                self.proprio[3] as f64,
            ],
        }
    }

    pub fn action(&self) -> Action {
        Action::new(
            self.action[0] as f64,
            self.action[1] as f64,
            self.action[2] as f64,
            self.action[3] as f64,
        )
    }
}

/// One expert demonstration with the exact config that produced it, so it
/// can be replayed against the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub config: EnvConfig,
    pub steps: Vec<StepRecord>,
    pub is_recovery: bool,
    pub pick_success: bool,
    pub delivery_success: bool,
    pub target_tube: u8,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn episode_from_trace(config: EnvConfig, trace: &RolloutTrace, is_recovery: bool) -> Episode {
    let last = trace.steps.last().expect("rollout produced at least one step");
    Episode {
        config,
        steps: trace
            .steps
            .iter()
            .map(|s| StepRecord::from_parts(&s.observation, s.action))
            .collect(),
        is_recovery,
        pick_success: last.flags.pick_success,
        delivery_success: last.flags.delivery_success,
        target_tube: trace.target_tube,
    }
}

fn derive_attempt_seed(base: u64, attempt: u64) -> u64 {
    if attempt == 0 {
        return base;
    }
    // splitmix64 over (base, attempt)
    let mut z = base ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Roll the expert to a delivered episode.
///
/// `force_slip_on_first_attempt` stages a recovery demonstration: the first
/// lift sheds the seed regardless of `p_slip`, so the episode records one
/// failure plus the retry. Rollouts that miss delivery inside the step
/// budget are discarded and regenerated on a fresh RNG stream; the discard
/// count is returned alongside the episode.
pub fn generate_episode(
    config: &EnvConfig,
    force_slip_on_first_attempt: bool,
) -> Result<(Episode, u32)> {
    let mut discards = 0u32;
    loop {
        if discards >= 20 {
            return Err(DataError::Generation { discards });
        }
        let attempt_config = EnvConfig {
            rng_seed: derive_attempt_seed(config.rng_seed, discards as u64),
            force_first_slip: force_slip_on_first_attempt,
            ..config.clone()
        };
        let mut expert = ScriptedExpert::new();
        let (result, trace) = rollout(attempt_config.clone(), &mut expert)?;
        if result.delivery_success {
            return Ok((episode_from_trace(attempt_config, &trace, force_slip_on_first_attempt), discards));
        }
        discards += 1;
    }
}

/// Replay the recorded actions through a fresh environment and confirm the
/// recorded observations and flags come back bit-exactly.
pub fn verify_replay(episode: &Episode) -> Result<()> {
    let (mut env, first_obs) = Env::reset(episode.config.clone())?;
    let mut obs = first_obs;
    for (i, step) in episode.steps.iter().enumerate() {
        if step.image.len() != IMAGE_PIXELS {
            return Err(DataError::ReplayDiverged { step: i });
        }
        let quantized = StepRecord::from_parts(&obs, step.action());
        if quantized.image != step.image
            || quantized.force != step.force
            || quantized.proprio != step.proprio
        {
            return Err(DataError::ReplayDiverged { step: i });
        }
        let (next, _) = env.step(step.action())?;
        obs = next;
    }
    let flags = env.flags();
    if flags.delivery_success != episode.delivery_success || flags.pick_success != episode.pick_success
    {
        return Err(DataError::ReplayDiverged { step: episode.steps.len() });
    }
    Ok(())
}
