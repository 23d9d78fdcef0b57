//! Closed-loop execution of chunk-predicting policies.
//!
//! Each control step the policy contributes a fresh k-step chunk; the
//! [`ChunkBuffer`] keeps every prediction made for a timestep and
//! [`ChunkBuffer::ensembled_action`] blends the overlapping predictions
//! with exponential weights, smoothing out single-chunk noise. [`rollout`]
//! drives one episode and accounts for retries and loop failures.

use hiact_sim_env::{Action, ActionChunk, Env, EnvConfig, EnvError, EnvState, EventFlags, Observation};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("no predictions buffered for timestep {0}")]
    NoPrediction(u64),

    #[error("chunk length {got} does not match horizon {expected}")]
    ChunkLength { got: usize, expected: usize },

    #[error(transparent)]
    Env(#[from] EnvError),
}

pub type Result<T> = std::result::Result<T, ControlError>;

/// Which end of the prediction history gets the largest ensembling weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightOrientation {
    /// Oldest prediction weighted highest: damps reaction to the newest,
    /// possibly noisy, chunk.
    #[default]
    FavorOldest,
    FavorNewest,
}

/// Overlapping per-timestep predictions from successive chunks.
#[derive(Debug, Clone)]
pub struct ChunkBuffer {
    horizon: usize,
    rate: f64,
    orientation: WeightOrientation,
    /// Predictions per absolute timestep, in push order (oldest first).
    entries: BTreeMap<u64, Vec<[f64; 4]>>,
}

impl ChunkBuffer {
    pub fn new(horizon: usize, rate: f64) -> Self {
        ChunkBuffer::with_orientation(horizon, rate, WeightOrientation::default())
    }

    pub fn with_orientation(horizon: usize, rate: f64, orientation: WeightOrientation) -> Self {
        ChunkBuffer { horizon, rate, orientation, entries: BTreeMap::new() }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Register a chunk predicted at `t_now`: row `i` becomes a candidate
    /// action for timestep `t_now + i`. Entries for earlier timesteps are
    /// evicted.
    pub fn push_chunk(&mut self, t_now: u64, chunk: &ActionChunk) -> Result<()> {
        if chunk.len() != self.horizon {
            return Err(ControlError::ChunkLength { got: chunk.len(), expected: self.horizon });
        }
        self.entries = self.entries.split_off(&t_now);
        for (i, action) in chunk.iter().enumerate() {
            self.entries
                .entry(t_now + i as u64)
                .or_default()
                .push(action.as_array());
        }
        Ok(())
    }

    /// Number of predictions currently held for `t`.
    pub fn prediction_count(&self, t: u64) -> usize {
        self.entries.get(&t).map_or(0, Vec::len)
    }

    /// Exponentially weighted mean of every prediction for `t`:
    /// `sum(w_i a_i) / sum(w_i)` with `w_i = exp(-rate * i)` and `i`
    /// counted from the favored end. Components are clamped to [0, 1].
    pub fn ensembled_action(&self, t: u64) -> Result<Action> {
        let preds = self.entries.get(&t).filter(|p| !p.is_empty()).ok_or(ControlError::NoPrediction(t))?;
        let n = preds.len();
        let mut acc = [0.0f64; 4];
        let mut total = 0.0;
        for (idx, pred) in preds.iter().enumerate() {
            let age = match self.orientation {
                WeightOrientation::FavorOldest => idx,
                WeightOrientation::FavorNewest => n - 1 - idx,
            };
            let w = (-self.rate * age as f64).exp();
            total += w;
            for c in 0..4 {
                acc[c] += w * pred[c];
            }
        }
        Ok(Action::new(acc[0] / total, acc[1] / total, acc[2] / total, acc[3] / total))
    }
}

/// Per-trial outcome counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialResult {
    pub pick_success: bool,
    pub delivery_success: bool,
    pub grasp_attempts: u32,
    /// Step budget ran out after three or more grasp attempts without a
    /// delivery: the policy was stuck retrying.
    pub loop_failure: bool,
    pub steps_used: u32,
}

/// Grasp attempts at or beyond this count qualify a timeout as a loop failure.
pub const LOOP_FAILURE_ATTEMPTS: u32 = 3;

impl TrialResult {
    fn from_flags(flags: EventFlags, steps_used: u32) -> Self {
        TrialResult {
            pick_success: flags.pick_success,
            delivery_success: flags.delivery_success,
            grasp_attempts: flags.grasp_attempts,
            loop_failure: !flags.delivery_success
                && flags.grasp_attempts >= LOOP_FAILURE_ATTEMPTS,
            steps_used,
        }
    }
}

/// One executed control step: what the policy saw, what ran, what happened.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Observation the action was computed from.
    pub observation: Observation,
    pub action: Action,
    /// Whether a seed was between the fingers at observation time.
    pub holding: bool,
    /// Cumulative event flags after the step.
    pub flags: EventFlags,
}

/// Full per-step record of a rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutTrace {
    pub steps: Vec<TraceStep>,
    /// Tube the episode was asked to deliver into.
    pub target_tube: u8,
}

/// Anything that can drive the environment one action at a time.
///
/// Learned policies read only the observation; scripted experts may also
/// use the privileged environment state.
pub trait StepPolicy {
    fn action(&mut self, t: u64, state: &EnvState, obs: &Observation) -> Action;
}

impl<F: FnMut(u64, &EnvState, &Observation) -> Action> StepPolicy for F {
    fn action(&mut self, t: u64, state: &EnvState, obs: &Observation) -> Action {
        self(t, state, obs)
    }
}

/// Run one episode to completion under `policy`.
///
/// The same loop serves scripted experts and learned policies, so expert
/// data collection and evaluation share a single code path.
pub fn rollout<P: StepPolicy>(config: EnvConfig, policy: &mut P) -> Result<(TrialResult, RolloutTrace)> {
    let (mut env, mut obs) = Env::reset(config)?;
    let mut trace = RolloutTrace { target_tube: env.state().target_tube, ..Default::default() };
    let mut t = 0u64;
    loop {
        let holding = env.state().held_seed.is_some();
        let action = policy.action(t, env.state(), &obs);
        let (next_obs, flags) = env.step(action)?;
        trace.steps.push(TraceStep { observation: obs, action, holding, flags });
        obs = next_obs;
        t += 1;
        if flags.episode_done {
            return Ok((TrialResult::from_flags(flags, t as u32), trace));
        }
    }
}
