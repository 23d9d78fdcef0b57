use crate::force::force_readout;
use crate::geometry::*;
use crate::render::render_image;
use crate::{Action, EnvConfig, EnvError, EventFlags, Observation, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Where a seed currently is. A seed is in exactly one place at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPlace {
    /// Lying in the workspace (dish or dropped position).
    Free,
    /// Between the gripper fingers; position tracks the gripper.
    Held,
    /// Delivered into a tube.
    Tube,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub pos: [f64; 2],
    pub diameter: f64,
    pub contrast: f64,
    pub place: SeedPlace,
}

impl Seed {
    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }
}

/// Physical state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Gripper pose: (x, y) position, z height (1 = up), aperture g (1 = open).
    pub gripper: [f64; 4],
    pub seeds: Vec<Seed>,
    pub held_seed: Option<usize>,
    pub dish_center: [f64; 2],
    pub dish_radius: f64,
    pub target_tube: u8,
    pub step: u32,
}

impl EnvState {
    pub fn gripper_xy(&self) -> [f64; 2] {
        [self.gripper[0], self.gripper[1]]
    }

    /// Diameter of the held seed, if any.
    pub fn held_diameter(&self) -> Option<f64> {
        self.held_seed.map(|i| self.seeds[i].diameter)
    }

    /// Physical finger gap for the current aperture.
    pub fn physical_gap(&self) -> f64 {
        APERTURE_SCALE * self.gripper[3]
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// One episode of the environment: state, event flags, and the RNG stream
/// that drives slip draws and sensor noise.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: EnvState,
    flags: EventFlags,
    rng: ChaCha8Rng,
    /// Pending forced slip, consumed by the first lift.
    force_slip_pending: bool,
}

impl Env {
    /// Draw a fresh episode. RNG consumption order: dish jitter (x, y),
    /// seed count, per-seed placement attempts (x, y each), target tube
    /// (when not fixed), then the initial observation's force noise.
    pub fn reset(config: EnvConfig) -> Result<(Env, Observation)> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

        let j = config.dish_center_jitter;
        let dish_center = [
            DISH_CENTER[0] + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 },
            DISH_CENTER[1] + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 },
        ];

        let (lo, hi) = config.n_seeds_range;
        let n_seeds = rng.gen_range(lo..=hi) as usize;
        let diameter = SEED_BASE_DIAMETER * config.seed_size_multiplier;
        let placement_radius = (DISH_RADIUS - diameter / 2.0).max(0.0);

        let mut seeds: Vec<Seed> = Vec::with_capacity(n_seeds);
        for _ in 0..n_seeds {
            let mut placed = false;
            for _attempt in 0..1000 {
                let x = rng.gen_range(-placement_radius..=placement_radius);
                let y = rng.gen_range(-placement_radius..=placement_radius);
                if x * x + y * y > placement_radius * placement_radius {
                    continue;
                }
                let pos = [dish_center[0] + x, dish_center[1] + y];
                let overlaps = seeds
                    .iter()
                    .any(|s| dist2(s.pos, pos) < (s.diameter / 2.0 + diameter / 2.0).powi(2));
                if overlaps {
                    continue;
                }
                seeds.push(Seed { pos, diameter, contrast: config.seed_contrast, place: SeedPlace::Free });
                placed = true;
                break;
            }
            if !placed {
                return Err(EnvError::CrowdedDish { attempts: 1000 });
            }
        }

        let target_tube = match config.target_tube {
            Some(t) => t,
            None => rng.gen_range(0..4u8),
        };

        let state = EnvState {
            gripper: [GRIPPER_START[0], GRIPPER_START[1], 1.0, 1.0],
            seeds,
            held_seed: None,
            dish_center,
            dish_radius: DISH_RADIUS,
            target_tube,
            step: 0,
        };
        let force_slip_pending = config.force_first_slip;
        let mut env = Env { config, state, flags: EventFlags::default(), rng, force_slip_pending };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn flags(&self) -> EventFlags {
        self.flags
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Render the current observation, drawing fresh force noise.
    pub fn observe(&mut self) -> Observation {
        let image = render_image(&self.state);
        let force = force_readout(&self.state, &mut self.rng);
        Observation {
            image,
            force,
            proprio: self.state.gripper,
        }
    }

    /// Advance one control step toward an absolute target pose.
    pub fn step(&mut self, action: Action) -> Result<(Observation, EventFlags)> {
        if self.flags.episode_done {
            return Err(EnvError::EpisodeDone);
        }
        let prev_z = self.state.gripper[2];

        let rate = [RATE_POS, RATE_POS, RATE_POS, RATE_APERTURE];
        let target = action.as_array();
        for axis in 0..4 {
            let delta = (target[axis] - self.state.gripper[axis]).clamp(-rate[axis], rate[axis]);
            self.state.gripper[axis] += delta;
        }
        let gxy = self.state.gripper_xy();
        let z = self.state.gripper[2];
        let gap = self.state.physical_gap();

        if let Some(held) = self.state.held_seed {
            self.state.seeds[held].pos = gxy;

            // Slip draw happens once per upward crossing of the lift line.
            if prev_z < LIFT_Z && z >= LIFT_Z {
                let slips = if self.force_slip_pending {
                    self.force_slip_pending = false;
                    true
                } else {
                    self.rng.gen_range(0.0..1.0) < self.config.p_slip
                };
                if slips {
                    let dx = self.rng.gen_range(-SLIP_PERTURB..=SLIP_PERTURB);
                    let dy = self.rng.gen_range(-SLIP_PERTURB..=SLIP_PERTURB);
                    let seed = &mut self.state.seeds[held];
                    let mut pos = [gxy[0] + dx, gxy[1] + dy];
                    // the seed falls back into the dish
                    let r_max = self.state.dish_radius - seed.diameter / 2.0;
                    let off = [pos[0] - self.state.dish_center[0], pos[1] - self.state.dish_center[1]];
                    let norm = (off[0] * off[0] + off[1] * off[1]).sqrt();
                    if norm > r_max {
                        pos = [
                            self.state.dish_center[0] + off[0] / norm * r_max,
                            self.state.dish_center[1] + off[1] / norm * r_max,
                        ];
                    }
                    seed.pos = pos;
                    seed.place = SeedPlace::Free;
                    self.state.held_seed = None;
                    self.flags.slip_occurred = true;
                } else {
                    self.flags.pick_success = true;
                }
            }
        }

        // Release: the fingers open beyond the held seed's diameter.
        if let Some(held) = self.state.held_seed {
            let seed_d = self.state.seeds[held].diameter;
            if gap > seed_d {
                let tube = tube_position(self.state.target_tube as usize);
                let over_target = dist2(gxy, tube) <= TUBE_RADIUS * TUBE_RADIUS;
                let seed = &mut self.state.seeds[held];
                if over_target && z < GRASP_Z && self.flags.pick_success {
                    seed.place = SeedPlace::Tube;
                    seed.pos = tube;
                    self.flags.delivery_success = true;
                } else {
                    seed.place = SeedPlace::Free;
                    seed.pos = gxy;
                }
                self.state.held_seed = None;
            }
        } else if z < GRASP_Z {
            // Grasp: fingers close below a nearby free seed's diameter.
            let mut best: Option<(usize, f64)> = None;
            for (i, seed) in self.state.seeds.iter().enumerate() {
                if seed.place != SeedPlace::Free {
                    continue;
                }
                let d2 = dist2(gxy, seed.pos);
                if d2 <= seed.radius() * seed.radius() && gap < seed.diameter {
                    if best.map_or(true, |(_, bd)| d2 < bd) {
                        best = Some((i, d2));
                    }
                }
            }
            if let Some((i, _)) = best {
                self.state.seeds[i].place = SeedPlace::Held;
                self.state.seeds[i].pos = gxy;
                self.state.held_seed = Some(i);
                self.flags.grasp_acquired = true;
                self.flags.grasp_attempts += 1;
            }
        }

        self.state.step += 1;
        if self.flags.delivery_success || self.state.step >= self.config.max_steps {
            self.flags.episode_done = true;
        }

        let obs = self.observe();
        Ok((obs, self.flags))
    }
}
