use hiact_controller::StepPolicy;
use hiact_sim_env::{geometry, Action, EnvState, Observation, Seed, SeedPlace};

/// Force threshold separating a loaded grasp (0.75 expected) from an empty
/// closure (0.15 expected); midway between them maximizes the noise margin.
pub const THETA_GRASP: f64 = 0.4;

/// Working height inside the grasp zone.
const Z_PICK: f64 = 0.15;
/// Carry height, above the slip line.
const Z_CARRY: f64 = 0.55;
/// Re-descend staging height during recovery.
const Z_REAPPROACH: f64 = 0.3;
/// Retreat height after a failed release.
const Z_RETREAT: f64 = 0.8;
/// Arrival tolerance; actions pass through 32-bit actuation so exact
/// float equality is not available.
const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertPhase {
    Approach,
    Descend,
    Close,
    Lift,
    Check,
    /// Recovery: reopen and descend toward the seed's current position.
    Reapproach,
    Transport,
    DescendTube,
    Release,
    Retreat,
    Done,
}

/// Aperture to hold while approaching a seed of diameter `d`: open enough
/// to clear the seed with margin, but pre-closed to shorten the grasp.
fn approach_aperture(d: f64) -> f64 {
    (1.3 * d / geometry::APERTURE_SCALE).clamp(0.5, 1.0)
}

fn nearest_free_seed(state: &EnvState) -> Option<&Seed> {
    let g = state.gripper;
    state
        .seeds
        .iter()
        .filter(|s| s.place == SeedPlace::Free)
        .min_by(|a, b| {
            let da = (a.pos[0] - g[0]).powi(2) + (a.pos[1] - g[1]).powi(2);
            let db = (b.pos[0] - g[0]).powi(2) + (b.pos[1] - g[1]).powi(2);
            da.partial_cmp(&db).unwrap()
        })
}

fn aligned_xy(state: &EnvState, target: [f64; 2]) -> bool {
    (state.gripper[0] - target[0]).abs() <= EPS && (state.gripper[1] - target[1]).abs() <= EPS
}

fn hold(state: &EnvState) -> Action {
    let g = state.gripper;
    Action::new(g[0], g[1], g[2], g[3])
}

/// One expert decision: the action to run now and the phase to be in at
/// the next step. Pure in (state, phase, last observed force).
pub fn expert_action(
    state: &EnvState,
    phase: ExpertPhase,
    last_force: [f64; 3],
) -> (Action, ExpertPhase) {
    let g = state.gripper;
    let mut phase = phase;
    // Arrival conditions fall through so a finished phase does not waste a
    // step; Check always consumes one step so the post-lift force reading
    // is the one that decides.
    for _ in 0..4 {
        match phase {
            ExpertPhase::Approach => {
                let Some(seed) = nearest_free_seed(state) else {
                    return (hold(state), phase);
                };
                if aligned_xy(state, seed.pos) {
                    phase = ExpertPhase::Descend;
                    continue;
                }
                let ga = approach_aperture(seed.diameter);
                return (Action::new(seed.pos[0], seed.pos[1], Z_PICK, ga), phase);
            }
            ExpertPhase::Descend => {
                let Some(seed) = nearest_free_seed(state) else {
                    return (hold(state), ExpertPhase::Approach);
                };
                if g[2] <= Z_PICK + EPS {
                    phase = ExpertPhase::Close;
                    continue;
                }
                let ga = approach_aperture(seed.diameter);
                return (Action::new(seed.pos[0], seed.pos[1], Z_PICK, ga), phase);
            }
            ExpertPhase::Close => {
                if g[3] <= EPS {
                    phase = ExpertPhase::Lift;
                    continue;
                }
                return (Action::new(g[0], g[1], Z_PICK, 0.0), phase);
            }
            ExpertPhase::Lift => {
                if g[2] >= Z_CARRY - EPS {
                    // force reading settles one step after the slip line
                    return (hold(state), ExpertPhase::Check);
                }
                return (Action::new(g[0], g[1], Z_CARRY, 0.0), phase);
            }
            ExpertPhase::Check => {
                phase = if last_force[2].abs() >= THETA_GRASP {
                    ExpertPhase::Transport
                } else {
                    ExpertPhase::Reapproach
                };
                continue;
            }
            ExpertPhase::Reapproach => {
                let Some(seed) = nearest_free_seed(state) else {
                    return (hold(state), ExpertPhase::Approach);
                };
                let ga = approach_aperture(seed.diameter);
                if aligned_xy(state, seed.pos) && g[3] >= ga - EPS && g[2] <= Z_REAPPROACH + EPS {
                    phase = ExpertPhase::Descend;
                    continue;
                }
                return (Action::new(seed.pos[0], seed.pos[1], Z_REAPPROACH, ga), phase);
            }
            ExpertPhase::Transport => {
                let tube = geometry::tube_position(state.target_tube as usize);
                if aligned_xy(state, tube) {
                    phase = ExpertPhase::DescendTube;
                    continue;
                }
                return (Action::new(tube[0], tube[1], Z_CARRY, 0.0), phase);
            }
            ExpertPhase::DescendTube => {
                let tube = geometry::tube_position(state.target_tube as usize);
                if g[2] <= Z_PICK + EPS {
                    phase = ExpertPhase::Release;
                    continue;
                }
                return (Action::new(tube[0], tube[1], Z_PICK, 0.0), phase);
            }
            ExpertPhase::Release => {
                let tube = geometry::tube_position(state.target_tube as usize);
                if state.held_seed.is_none() && g[3] >= 0.5 {
                    phase = ExpertPhase::Retreat;
                    continue;
                }
                return (Action::new(tube[0], tube[1], Z_PICK, 1.0), phase);
            }
            ExpertPhase::Retreat => {
                if g[2] >= Z_RETREAT - EPS {
                    // a failed release leaves the seed on the table: retry
                    phase = if nearest_free_seed(state).is_some() {
                        ExpertPhase::Approach
                    } else {
                        ExpertPhase::Done
                    };
                    continue;
                }
                return (Action::new(g[0], g[1], Z_RETREAT, 1.0), phase);
            }
            ExpertPhase::Done => {
                return (hold(state), phase);
            }
        }
    }
    (hold(state), phase)
}

/// Stateful wrapper around [`expert_action`] for rollouts. Actions pass
/// through 32-bit precision, matching the episode recording format, so a
/// recorded episode replays bit-exactly.
#[derive(Debug, Clone)]
pub struct ScriptedExpert {
    phase: ExpertPhase,
    /// Phase after each step, for transition assertions.
    pub phase_log: Vec<ExpertPhase>,
}

impl Default for ScriptedExpert {
    fn default() -> Self {
        Self::new()
    }
}

impl ScriptedExpert {
    pub fn new() -> Self {
        ScriptedExpert { phase: ExpertPhase::Approach, phase_log: Vec::new() }
    }

    pub fn phase(&self) -> ExpertPhase {
        self.phase
    }

    /// CHECK -> REAPPROACH followed later by CHECK -> TRANSPORT.
    pub fn saw_recovery_then_success(&self) -> bool {
        let mut saw_reapproach = false;
        let mut prev = ExpertPhase::Approach;
        for &p in &self.phase_log {
            if prev == ExpertPhase::Check && p == ExpertPhase::Reapproach {
                saw_reapproach = true;
            }
            if prev == ExpertPhase::Check && p == ExpertPhase::Transport && saw_reapproach {
                return true;
            }
            prev = p;
        }
        false
    }
}

impl StepPolicy for ScriptedExpert {
    fn action(&mut self, _t: u64, state: &EnvState, obs: &Observation) -> Action {
        let (action, next) = expert_action(state, self.phase, obs.force);
        self.phase = next;
        self.phase_log.push(next);
        let q = |v: f64| v as f32 as f64;
        Action::new(q(action.x), q(action.y), q(action.z), q(action.g))
    }
}
