use hiact_sim_env::{expected_force, geometry, render_image, EnvState, Seed, SeedPlace};
use proptest::prelude::*;

fn state_with(gripper: [f64; 4], seeds: Vec<Seed>, held: Option<usize>) -> EnvState {
    EnvState {
        gripper,
        seeds,
        held_seed: held,
        dish_center: [0.5, 0.45],
        dish_radius: 0.18,
        target_tube: 0,
        step: 0,
    }
}

proptest! {
    /// Soft-finger saturation: no aperture or seed size produces force
    /// beyond the cap — there is no crush state.
    #[test]
    fn force_never_exceeds_cap(
        g in 0.0f64..=1.0,
        mult in 0.1f64..6.0,
        held in any::<bool>(),
    ) {
        let d = geometry::SEED_BASE_DIAMETER * mult;
        let seed = Seed { pos: [0.5, 0.45], diameter: d, contrast: 1.0, place: if held { SeedPlace::Held } else { SeedPlace::Free } };
        let state = state_with([0.5, 0.45, 0.1, g], vec![seed], if held { Some(0) } else { None });
        let f = expected_force(&state);
        prop_assert!(f[2] <= geometry::FORCE_CAP);
        prop_assert!(f[2] >= 0.0);
    }

    /// Occlusion: with a closed gripper, the only difference between
    /// holding and not holding is the force channel.
    #[test]
    fn occlusion_hides_grasp_state(
        x in 0.25f64..0.75,
        y in 0.25f64..0.65,
        g in 0.0f64..=0.1,
        z in 0.0f64..0.2,
    ) {
        let seed = Seed { pos: [x, y], diameter: 0.03, contrast: 1.0, place: SeedPlace::Held };
        let with = state_with([x, y, z, g], vec![seed.clone()], Some(0));
        let without = state_with([x, y, z, g], vec![Seed { place: SeedPlace::Free, ..seed }], None);
        prop_assert_eq!(render_image(&with), render_image(&without));
        let diff = expected_force(&with)[2] - expected_force(&without)[2];
        prop_assert!(diff >= 0.5, "force gap {} too small", diff);
    }
}
