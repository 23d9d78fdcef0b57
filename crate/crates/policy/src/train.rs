use crate::model::PolicySession;
use crate::params::checkpoint_bytes;
use crate::{ModelParams, PolicyConfig, PolicyError, Result};
use hiact_demonstrator::Dataset;
use hiact_sim_env::Observation;
use hiact_tensor_core::{adam_step, AdamParams, AdamState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub steps: Vec<StepLoss>,
    pub wall_seconds: f64,
    /// SHA-256 of the final checkpoint bytes; equal seeds give equal sums.
    pub params_checksum: String,
}

impl TrainLog {
    /// Mean reconstruction loss over the trailing `n` steps.
    pub fn final_reconstruction(&self, n: usize) -> f64 {
        let tail = &self.steps[self.steps.len().saturating_sub(n)..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().map(|s| s.reconstruction).sum::<f64>() / tail.len() as f64
    }
}

/// One teacher-forcing example: the recorded observation at t and the
/// following k actions, the final action repeated past the episode end.
pub type TrainingItem = (Observation, Vec<[f64; 4]>);

/// Uniformly sample (episode, t) pairs over all recorded steps.
pub fn sample_training_batch(
    dataset: &Dataset,
    k: usize,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<TrainingItem>> {
    let total: usize = dataset.episodes.iter().map(|e| e.len()).sum();
    if total == 0 {
        return Err(PolicyError::EmptyDataset);
    }
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let mut flat = rng.gen_range(0..total);
        let mut episode = &dataset.episodes[0];
        for e in &dataset.episodes {
            if flat < e.len() {
                episode = e;
                break;
            }
            flat -= e.len();
        }
        let t = flat;
        let obs = episode.steps[t].observation();
        let chunk: Vec<[f64; 4]> = (0..k)
            .map(|i| {
                let idx = (t + i).min(episode.len() - 1);
                let a = &episode.steps[idx].action;
                [a[0] as f64, a[1] as f64, a[2] as f64, a[3] as f64]
            })
            .collect();
        batch.push((obs, chunk));
    }
    Ok(batch)
}

/// Train from scratch on a demonstration dataset.
///
/// Deterministic given (dataset, config): one ChaCha stream seeded from
/// `config.rng_seed` drives initialization, batch sampling, and latent
/// noise, in that order.
pub fn train(dataset: &Dataset, config: &PolicyConfig) -> Result<(ModelParams, TrainLog)> {
    config.validate()?;
    if dataset.episodes.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let init = ModelParams::init(config, &mut rng)?;
    let mut session = PolicySession::new(&init, true)?;

    let sizes: Vec<usize> = init.tensors.iter().map(|t| t.data.len()).collect();
    let mut adam = AdamState::new(AdamParams { lr: config.lr, ..Default::default() }, &sizes);

    let mut log = TrainLog { steps: Vec::with_capacity(config.train_steps as usize), wall_seconds: 0.0, params_checksum: String::new() };

    for step in 0..config.train_steps {
        let batch = sample_training_batch(dataset, config.chunk_k, config.batch_size, &mut rng)?;
        session.reset();
        session.tape.zero_grad();

        let mut total_ids = Vec::with_capacity(batch.len());
        let mut recon_sum = 0.0;
        let mut kl_sum = 0.0;
        for (obs, chunk) in &batch {
            let target_data: Vec<f64> = chunk.iter().flatten().copied().collect();
            let target = session.tape.constant(target_data, &[config.chunk_k, 4])?;
            let proprio = session.tape.constant(obs.proprio.to_vec(), &[1, 4])?;
            let (mu, logvar) = session.cvae_encode(target, proprio)?;
            let z = session.sample_latent(mu, logvar, &mut rng)?;
            let tokens = session.tokenize(obs)?;
            let pred = session.forward(tokens, z)?;
            let (total, recon, kl) = session.loss(pred, target, mu, logvar, config.beta_kl)?;
            recon_sum += session.tape.value(recon);
            kl_sum += session.tape.value(kl);
            total_ids.push(total);
        }
        let mut batch_loss = total_ids[0];
        for &id in &total_ids[1..] {
            batch_loss = session.tape.add(batch_loss, id)?;
        }
        let batch_loss = session.tape.scale(batch_loss, 1.0 / batch.len() as f64);

        let loss_value = session.tape.value(batch_loss);
        if !loss_value.is_finite() {
            return Err(PolicyError::NonFiniteLoss { step });
        }
        session.tape.backward(batch_loss)?;
        let ids = session.param_ids().to_vec();
        adam_step(&mut session.tape, &ids, &mut adam)?;

        log.steps.push(StepLoss {
            total: loss_value,
            reconstruction: recon_sum / batch.len() as f64,
            kl: kl_sum / batch.len() as f64,
        });
    }
    session.reset();

    let params = session.export_params(&init);
    let digest = Sha256::digest(checkpoint_bytes(&params));
    log.params_checksum = digest.iter().map(|b| format!("{b:02x}")).collect();
    log.wall_seconds = start.elapsed().as_secs_f64();
    Ok((params, log))
}
