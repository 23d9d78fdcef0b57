use crate::geometry::*;
use crate::EnvState;
use rand::Rng;

/// Noise-free expected force at the fingers.
///
/// Holding a seed of diameter `d` with physical gap `gap` produces
/// `f_z = min(FORCE_CAP, FORCE_STIFFNESS * max(0, d - gap))`: the soft
/// fingers bend outward around the seed, so the force saturates instead of
/// crushing. Empty fingers read `SELF_CONTACT_FORCE` once they touch each
/// other, and zero otherwise. Lateral axes are zero.
pub fn expected_force(state: &EnvState) -> [f64; 3] {
    let gap = state.physical_gap();
    let fz = match state.held_diameter() {
        Some(d) => (FORCE_STIFFNESS * (d - gap).max(0.0)).min(FORCE_CAP),
        None => {
            if gap < SELF_CONTACT_GAP {
                SELF_CONTACT_FORCE
            } else {
                0.0
            }
        }
    };
    [0.0, 0.0, fz]
}

/// Expected force plus Gaussian sensor noise on all three axes.
pub fn force_readout(state: &EnvState, rng: &mut impl Rng) -> [f64; 3] {
    let mut f = expected_force(state);
    for axis in &mut f {
        *axis += FORCE_NOISE_SIGMA * sample_normal(rng);
    }
    f
}

/// Standard normal via Box-Muller (two uniform draws per sample).
pub(crate) fn sample_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
