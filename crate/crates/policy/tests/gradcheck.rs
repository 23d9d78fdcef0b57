//! Full-objective gradient check: reverse-mode gradients of the complete
//! CVAE loss on a frozen mini-batch against central finite differences.

use hiact_demonstrator::build_dataset;
use hiact_policy::{
    cvae_encode, forward, loss, reparameterize, sample_training_batch, tokenize, ModelParams,
    PolicyConfig, PolicySession,
};
use hiact_tensor_core::gradient_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn full_model_gradients_match_finite_differences() {
    let cfg = PolicyConfig { rng_seed: 3, ..PolicyConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let mut session = PolicySession::new(&params, true).unwrap();

    let ds = build_dataset(2, 1, 31).unwrap();
    let batch = sample_training_batch(&ds, cfg.chunk_k, 4, &mut rng).unwrap();
    // latent noise frozen per item so the loss closure is deterministic
    let eps: Vec<Vec<f64>> = (0..batch.len())
        .map(|_| (0..cfg.z_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let ids = session.ids().clone();
    let trainable = session.param_ids().to_vec();
    let (k, z_dim, beta) = (cfg.chunk_k, cfg.z_dim, cfg.beta_kl);

    let worst = gradient_check(
        &mut session.tape,
        &trainable,
        |tape| {
            let mut totals = Vec::new();
            for ((obs, chunk), eps_i) in batch.iter().zip(&eps) {
                let target_data: Vec<f64> = chunk.iter().flatten().copied().collect();
                let target = tape.constant(target_data, &[k, 4])?;
                let proprio = tape.constant(obs.proprio.to_vec(), &[1, 4])?;
                let (mu, logvar) = unwrap_policy(cvae_encode(tape, &ids, target, proprio))?;
                let eps_const = tape.constant(eps_i.clone(), &[1, z_dim])?;
                let z = unwrap_policy(reparameterize(tape, mu, logvar, eps_const))?;
                let tokens = unwrap_policy(tokenize(tape, &ids, obs))?;
                let pred = unwrap_policy(forward(tape, &ids, tokens, z))?;
                let (total, _, _) = unwrap_policy(loss(tape, pred, target, mu, logvar, beta))?;
                totals.push(total);
            }
            let mut sum = totals[0];
            for &t in &totals[1..] {
                sum = tape.add(sum, t)?;
            }
            Ok(tape.scale(sum, 1.0 / totals.len() as f64))
        },
        1e-5,
        64,
        &mut rng,
    )
    .unwrap();

    assert!(worst <= 1e-4, "full-model gradient relative error {worst:.3e} > 1e-4");
}

/// The loss closure runs inside tensor-core, so policy errors fold back
/// into tensor errors.
fn unwrap_policy<T>(r: hiact_policy::Result<T>) -> hiact_tensor_core::Result<T> {
    r.map_err(|e| match e {
        hiact_policy::PolicyError::Tensor(t) => t,
        other => hiact_tensor_core::TensorError::ContractViolation(other.to_string()),
    })
}

#[test]
fn kl_gradient_through_cvae_encoder_is_tight() {
    let cfg = PolicyConfig { rng_seed: 5, ..PolicyConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let mut session = PolicySession::new(&params, true).unwrap();
    let ids = session.ids().clone();

    let chunk: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..1.0)).collect();
    let proprio: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
    let trainable = session.param_ids().to_vec();

    let worst = gradient_check(
        &mut session.tape,
        &trainable,
        |tape| {
            let c = tape.constant(chunk.clone(), &[10, 4])?;
            let p = tape.constant(proprio.clone(), &[1, 4])?;
            let (mu, logvar) = unwrap_policy(cvae_encode(tape, &ids, c, p))?;
            tape.kl_gaussian(mu, logvar)
        },
        1e-5,
        48,
        &mut rng,
    )
    .unwrap();
    assert!(worst <= 1e-5, "KL gradient relative error {worst:.3e} > 1e-5");
}
