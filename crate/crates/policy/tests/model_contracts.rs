use hiact_policy::{predict, ModelParams, PolicyConfig, PolicySession};
use hiact_sim_env::{Observation, IMAGE_PIXELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn default_params(seed: u64) -> ModelParams {
    let cfg = PolicyConfig { rng_seed: seed, ..PolicyConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelParams::init(&cfg, &mut rng).unwrap()
}

fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
    Observation {
        image: (0..IMAGE_PIXELS).map(|_| rng.gen_range(0.0..1.0)).collect(),
        force: [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.0..1.0)],
        proprio: [
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
        ],
    }
}

#[test]
fn token_count_depends_on_haptic_flag() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let obs = random_obs(&mut rng);

    let params = default_params(3);
    let mut session = PolicySession::new(&params, false).unwrap();
    let tokens = session.tokenize(&obs).unwrap();
    assert_eq!(session.tape.shape(tokens), &[19, 64]);

    let cfg = PolicyConfig { haptic_enabled: false, ..PolicyConfig::default() };
    let mut rng2 = ChaCha8Rng::seed_from_u64(3);
    let ablated = ModelParams::init(&cfg, &mut rng2).unwrap();
    let mut session = PolicySession::new(&ablated, false).unwrap();
    let tokens = session.tokenize(&obs).unwrap();
    assert_eq!(session.tape.shape(tokens), &[18, 64]);
}

#[test]
fn zero_observation_tokens_are_positional_plus_bias() {
    let params = default_params(5);
    let mut session = PolicySession::new(&params, false).unwrap();
    let obs = Observation { image: vec![0.0; IMAGE_PIXELS], force: [0.0; 3], proprio: [0.0; 4] };
    let tokens = session.tokenize(&obs).unwrap();
    let d = 64;
    let pos = params.tensor("pos_emb");
    let patch_b = params.tensor("patch_b");
    let proprio_b = params.tensor("proprio_b");
    let force_b = params.tensor("force_b");
    let data = session.tape.data(tokens);
    for row in 0..16 {
        for j in 0..d {
            let expected = pos.data[row * d + j] + patch_b.data[j];
            assert!((data[row * d + j] - expected).abs() < 1e-15);
        }
    }
    for j in 0..d {
        assert!((data[16 * d + j] - (pos.data[16 * d + j] + proprio_b.data[j])).abs() < 1e-15);
        assert!((data[17 * d + j] - (pos.data[17 * d + j] + force_b.data[j])).abs() < 1e-15);
        // latent slot carries its positional embedding only
        assert!((data[18 * d + j] - pos.data[18 * d + j]).abs() < 1e-15);
    }
}

#[test]
fn tokenize_matches_dense_projection_oracle() {
    let params = default_params(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let obs = random_obs(&mut rng);
    let mut session = PolicySession::new(&params, false).unwrap();
    let tokens = session.tokenize(&obs).unwrap();
    let d = 64;

    // dense-loop oracle for the force token (row 17)
    let force_w = params.tensor("force_w");
    let force_b = params.tensor("force_b");
    let pos = params.tensor("pos_emb");
    for j in 0..d {
        let mut v = force_b.data[j] + pos.data[17 * d + j];
        for i in 0..3 {
            v += obs.force[i] * force_w.data[i * d + j];
        }
        assert!((session.tape.data(tokens)[17 * d + j] - v).abs() < 1e-12);
    }

    // and for one image patch token: patch (1,2) -> row 6
    let patch_w = params.tensor("patch_w");
    let patch_b = params.tensor("patch_b");
    let (pr, pc) = (1, 2);
    for j in 0..d {
        let mut v = patch_b.data[j] + pos.data[6 * d + j];
        for i in 0..8 {
            for jj in 0..8 {
                let pixel = obs.image[(pr * 8 + i) * 32 + (pc * 8 + jj)];
                v += pixel * patch_w.data[(i * 8 + jj) * d + j];
            }
        }
        assert!((session.tape.data(tokens)[6 * d + j] - v).abs() < 1e-12);
    }
}

#[test]
fn cvae_encode_is_deterministic_and_spread() {
    let params = default_params(11);
    let mut session = PolicySession::new(&params, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let chunk: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
    let run = |session: &mut PolicySession, chunk: &[f64]| {
        session.reset();
        let c = session.tape.constant(chunk.to_vec(), &[10, 4]).unwrap();
        let p = session.tape.constant(vec![0.4, 0.5, 0.6, 0.7], &[1, 4]).unwrap();
        let (mu, lv) = session.cvae_encode(c, p).unwrap();
        (session.tape.data(mu).to_vec(), session.tape.data(lv).to_vec())
    };
    let (mu1, lv1) = run(&mut session, &chunk);
    let (mu2, lv2) = run(&mut session, &chunk);
    assert_eq!(mu1, mu2);
    assert_eq!(lv1, lv2);

    // generic chunks at random init give strictly positive KL
    session.reset();
    let c = session.tape.constant(chunk.clone(), &[10, 4]).unwrap();
    let p = session.tape.constant(vec![0.4, 0.5, 0.6, 0.7], &[1, 4]).unwrap();
    let (mu, lv) = session.cvae_encode(c, p).unwrap();
    let kl = session.tape.kl_gaussian(mu, lv).unwrap();
    assert!(session.tape.value(kl) > 0.0);
}

#[test]
fn sample_latent_statistics() {
    let params = default_params(13);
    let mut session = PolicySession::new(&params, false).unwrap();
    let z_dim = 16;

    // collapsed variance: z == mu
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    session.reset();
    let mu = session.tape.constant((0..z_dim).map(|i| i as f64 * 0.1).collect(), &[1, z_dim]).unwrap();
    let lv = session.tape.constant(vec![-60.0; z_dim], &[1, z_dim]).unwrap();
    let lv = session.tape.clamp(lv, -10.0, 10.0);
    let z = session.sample_latent(mu, lv, &mut rng).unwrap();
    for (zi, mi) in session.tape.data(z).iter().zip(session.tape.data(mu)) {
        // sigma = exp(-10/2) ~ 0.0067, so z collapses onto mu
        assert!((zi - mi).abs() < 5.0 * 0.0068, "z {zi} strayed from mu {mi}");
    }

    // empirical mean of many draws approaches mu
    let n = 100_000;
    let mut sums = vec![0.0; z_dim];
    session.reset();
    let mu = session.tape.constant(vec![0.3; z_dim], &[1, z_dim]).unwrap();
    let lv = session.tape.constant(vec![0.0; z_dim], &[1, z_dim]).unwrap();
    let base = session.tape.checkpoint();
    for _ in 0..n {
        let z = session.sample_latent(mu, lv, &mut rng).unwrap();
        for (s, v) in sums.iter_mut().zip(session.tape.data(z)) {
            *s += v;
        }
        session.tape.truncate(base);
    }
    let tol = 4.0 / (n as f64).sqrt();
    for s in &sums {
        let mean = s / n as f64;
        assert!((mean - 0.3).abs() < tol, "mean {mean} outside {tol} of 0.3");
    }

    // fixed seed reproduces z
    let mut r1 = ChaCha8Rng::seed_from_u64(55);
    let mut r2 = ChaCha8Rng::seed_from_u64(55);
    session.reset();
    let mu = session.tape.constant(vec![0.0; z_dim], &[1, z_dim]).unwrap();
    let lv = session.tape.constant(vec![0.5; z_dim], &[1, z_dim]).unwrap();
    let z1 = session.sample_latent(mu, lv, &mut r1).unwrap();
    let z1 = session.tape.data(z1).to_vec();
    let z2 = session.sample_latent(mu, lv, &mut r2).unwrap();
    assert_eq!(z1, session.tape.data(z2));
}

#[test]
fn forward_shape_and_determinism() {
    let params = default_params(17);
    let mut session = PolicySession::new(&params, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let obs = random_obs(&mut rng);
    let chunk1 = session.predict(&obs).unwrap();
    assert_eq!(chunk1.len(), 10);
    let chunk2 = session.predict(&obs).unwrap();
    assert_eq!(chunk1, chunk2);
    for a in &chunk1 {
        for c in a.as_array() {
            assert!((0.0..=1.0).contains(&c), "predict output clamped to [0,1]");
        }
    }
}

#[test]
fn permuting_patch_tokens_with_their_positions_leaves_output_unchanged() {
    let params = default_params(19);
    let mut session = PolicySession::new(&params, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let obs = random_obs(&mut rng);

    let tokens = session.tokenize(&obs).unwrap();
    let z = session.tape.constant(vec![0.0; 16], &[1, 16]).unwrap();
    let out_a = session.forward(tokens, z).unwrap();
    let out_a = session.tape.data(out_a).to_vec();

    // swap patch-token rows 3 and 12 (content + position travel together)
    session.reset();
    let tokens = session.tokenize(&obs).unwrap();
    let data = session.tape.data(tokens).to_vec();
    let d = 64;
    let mut swapped = data.clone();
    for j in 0..d {
        swapped[3 * d + j] = data[12 * d + j];
        swapped[12 * d + j] = data[3 * d + j];
    }
    let tokens_swapped = session.tape.constant(swapped, &[19, d]).unwrap();
    let z = session.tape.constant(vec![0.0; 16], &[1, 16]).unwrap();
    let out_b = session.forward(tokens_swapped, z).unwrap();
    let out_b = session.tape.data(out_b);
    for (a, b) in out_a.iter().zip(out_b) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn loss_components_compose() {
    let params = default_params(23);
    let mut session = PolicySession::new(&params, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);

    // pred == target, mu = 0, logvar = 0 -> total 0
    let zeros: Vec<f64> = vec![0.25; 40];
    let p = session.tape.constant(zeros.clone(), &[10, 4]).unwrap();
    let t = session.tape.constant(zeros, &[10, 4]).unwrap();
    let mu = session.tape.constant(vec![0.0; 16], &[1, 16]).unwrap();
    let lv = session.tape.constant(vec![0.0; 16], &[1, 16]).unwrap();
    let (total, recon, kl) = session.loss(p, t, mu, lv, 10.0).unwrap();
    assert_eq!(session.tape.value(total), 0.0);
    assert_eq!(session.tape.value(recon), 0.0);
    assert_eq!(session.tape.value(kl), 0.0);

    // beta = 0 -> total equals reconstruction
    let pr: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
    let tr: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mr: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lr: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = session.tape.constant(pr, &[10, 4]).unwrap();
    let t = session.tape.constant(tr, &[10, 4]).unwrap();
    let mu = session.tape.constant(mr, &[1, 16]).unwrap();
    let lv = session.tape.constant(lr, &[1, 16]).unwrap();
    let (total, recon, _) = session.loss(p, t, mu, lv, 0.0).unwrap();
    assert_eq!(session.tape.value(total), session.tape.value(recon));

    // random inputs: total equals the independently computed sum
    let (total, recon, kl) = session.loss(p, t, mu, lv, 10.0).unwrap();
    let expected = session.tape.value(recon) + 10.0 * session.tape.value(kl);
    assert!((session.tape.value(total) - expected).abs() < 1e-12);
}

#[test]
fn no_haptic_model_ignores_force() {
    let cfg = PolicyConfig { haptic_enabled: false, ..PolicyConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let mut obs = random_obs(&mut rng);
    let a = predict(&obs, &params).unwrap();
    obs.force = [9.0, -9.0, 9.0];
    let b = predict(&obs, &params).unwrap();
    assert_eq!(a, b, "force must not reach the ablated model");

    // the haptic model does react to force
    let params = default_params(29);
    let mut obs = random_obs(&mut rng);
    let a = predict(&obs, &params).unwrap();
    obs.force = [0.0, 0.0, 2.0];
    let b = predict(&obs, &params).unwrap();
    assert_ne!(a, b, "haptic model reads force");
}

#[test]
fn parameter_count_matches_closed_form() {
    let cfg = PolicyConfig::default();
    let params = default_params(31);
    let (d, f, z, k) = (cfg.d_model, cfg.ffn_dim, cfg.z_dim, cfg.chunk_k);
    let attn = 4 * d * d + 3 * d; // q/k/v/o weights, biases on q/v/o only
    let ln = 2 * d;
    let ffn = d * f + f + f * d + d;
    let enc_layer = attn + ln + ffn + ln;
    let dec_layer = attn + ln + attn + ln + ffn + ln;
    let expected = (64 * d + d)                    // patch embedding
        + (4 * d + d)                              // proprio embedding
        + (3 * d + d)                              // force embedding
        + z * d                                    // latent embedding
        + 19 * d                                   // positional table
        + cfg.n_encoder_layers * enc_layer + ln    // encoder stack + final norm
        + cfg.n_decoder_layers * dec_layer + ln    // decoder stack + final norm
        + k * d                                    // query tokens
        + (d * 4 + 4)                              // action head
        + ((4 * k + 4) * d + d) + 2 * (d * z + z); // CVAE encoder
    assert_eq!(params.param_count(), expected);
    // regression constant for the default config
    assert_eq!(params.param_count(), 180_132);
}
