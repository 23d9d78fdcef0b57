use crate::{ModelParams, PolicySession, Result};
use hiact_controller::{ChunkBuffer, StepPolicy, WeightOrientation};
use hiact_sim_env::{Action, EnvState, Observation};

/// A trained model driving the environment: predict a chunk every step,
/// push it into the buffer, execute the temporally ensembled action.
pub struct ChunkPolicyDriver {
    session: PolicySession,
    buffer: ChunkBuffer,
}

impl ChunkPolicyDriver {
    pub fn new(params: &ModelParams, ensembling_rate: f64) -> Result<Self> {
        Self::with_orientation(params, ensembling_rate, WeightOrientation::default())
    }

    pub fn with_orientation(
        params: &ModelParams,
        ensembling_rate: f64,
        orientation: WeightOrientation,
    ) -> Result<Self> {
        let session = PolicySession::new(params, false)?;
        let buffer =
            ChunkBuffer::with_orientation(params.config.chunk_k, ensembling_rate, orientation);
        Ok(ChunkPolicyDriver { session, buffer })
    }
}

impl StepPolicy for ChunkPolicyDriver {
    fn action(&mut self, t: u64, _state: &EnvState, obs: &Observation) -> Action {
        let chunk = self.session.predict(obs).expect("model dimensions are self-consistent");
        self.buffer.push_chunk(t, &chunk).expect("chunk length fixed by config");
        self.buffer
            .ensembled_action(t)
            .expect("the chunk just pushed covers timestep t")
    }
}
