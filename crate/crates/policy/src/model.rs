use crate::params::{ModelParams, N_PATCHES, PATCH_DIM, PATCH_GRID, PATCH_SIDE, POS_LATENT};
use crate::{PolicyConfig, Result};
use hiact_sim_env::{Action, ActionChunk, Observation, IMAGE_SIZE};
use hiact_tensor_core::{multi_head_attention, AttentionWeights, Tape64, TensorId};
use rand::Rng;
use std::collections::HashMap;

const LN_EPS: f64 = 1e-5;
/// Log-variance clamp; keeps exp() sane early in training.
const LOGVAR_CLAMP: f64 = 10.0;

/// Resolved tape ids of every model parameter, plus the config. Graph
/// builders below take this alongside a `&mut Tape64`, so a loss closure
/// over a borrowed tape can rebuild the whole objective (which is what the
/// finite-difference checker needs).
#[derive(Debug, Clone)]
pub struct ModelIds {
    cfg: PolicyConfig,
    by_name: HashMap<String, TensorId>,
    ordered: Vec<TensorId>,
}

impl ModelIds {
    fn id(&self, name: &str) -> TensorId {
        *self.by_name.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    fn attention(&self, prefix: &str) -> AttentionWeights {
        AttentionWeights {
            wq: self.id(&format!("{prefix}_wq")),
            bq: self.id(&format!("{prefix}_bq")),
            wk: self.id(&format!("{prefix}_wk")),
            wv: self.id(&format!("{prefix}_wv")),
            bv: self.id(&format!("{prefix}_bv")),
            wo: self.id(&format!("{prefix}_wo")),
            bo: self.id(&format!("{prefix}_bo")),
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    /// Parameter leaves in registry order.
    pub fn ordered(&self) -> &[TensorId] {
        &self.ordered
    }
}

/// Flatten the image into patch rows: patch (pr, pc) -> row pr*4 + pc,
/// pixels row-major within the patch.
fn patch_rows(obs: &Observation) -> Vec<f64> {
    let mut rows = vec![0.0; N_PATCHES * PATCH_DIM];
    for pr in 0..PATCH_GRID {
        for pc in 0..PATCH_GRID {
            let patch = pr * PATCH_GRID + pc;
            for i in 0..PATCH_SIDE {
                for j in 0..PATCH_SIDE {
                    rows[patch * PATCH_DIM + i * PATCH_SIDE + j] =
                        obs.image[(pr * PATCH_SIDE + i) * IMAGE_SIZE + (pc * PATCH_SIDE + j)];
                }
            }
        }
    }
    rows
}

/// Project an observation into the encoder token matrix: image patches,
/// proprio, force (haptic models only), latent slot, each with its
/// positional embedding. The latent slot carries only its position here;
/// [`forward`] adds the projected z.
pub fn tokenize(tape: &mut Tape64, ids: &ModelIds, obs: &Observation) -> Result<TensorId> {
    let d = ids.cfg.d_model;

    let patches = tape.constant(patch_rows(obs), &[N_PATCHES, PATCH_DIM])?;
    let img = tape.matmul(patches, ids.id("patch_w"))?;
    let img = tape.add_row_bias(img, ids.id("patch_b"))?;

    let proprio = tape.constant(obs.proprio.to_vec(), &[1, 4])?;
    let proprio = tape.matmul(proprio, ids.id("proprio_w"))?;
    let proprio = tape.add_row_bias(proprio, ids.id("proprio_b"))?;

    let latent_slot = tape.constant(vec![0.0; d], &[1, d])?;

    let pos = ids.id("pos_emb");
    let (tokens, pos_used) = if ids.cfg.haptic_enabled {
        let force = tape.constant(obs.force.to_vec(), &[1, 3])?;
        let force = tape.matmul(force, ids.id("force_w"))?;
        let force = tape.add_row_bias(force, ids.id("force_b"))?;
        (tape.concat_rows(&[img, proprio, force, latent_slot])?, pos)
    } else {
        let tokens = tape.concat_rows(&[img, proprio, latent_slot])?;
        let head = tape.slice_rows(pos, 0, POS_LATENT - 1)?; // image + proprio rows
        let latent_row = tape.slice_rows(pos, POS_LATENT, POS_LATENT + 1)?;
        (tokens, tape.concat_rows(&[head, latent_row])?)
    };
    Ok(tape.add(tokens, pos_used)?)
}

/// CVAE posterior over the latent given the target chunk and proprioception.
pub fn cvae_encode(
    tape: &mut Tape64,
    ids: &ModelIds,
    chunk: TensorId,
    proprio: TensorId,
) -> Result<(TensorId, TensorId)> {
    let k = ids.cfg.chunk_k;
    let flat = tape.reshape(chunk, &[1, 4 * k])?;
    let x = tape.concat_cols(&[flat, proprio])?;
    let h = tape.matmul(x, ids.id("cvae_w1"))?;
    let h = tape.add_row_bias(h, ids.id("cvae_b1"))?;
    let h = tape.gelu(h);
    let mu = tape.matmul(h, ids.id("cvae_mu_w"))?;
    let mu = tape.add_row_bias(mu, ids.id("cvae_mu_b"))?;
    let lv = tape.matmul(h, ids.id("cvae_lv_w"))?;
    let lv = tape.add_row_bias(lv, ids.id("cvae_lv_b"))?;
    let lv = tape.clamp(lv, -LOGVAR_CLAMP, LOGVAR_CLAMP);
    Ok((mu, lv))
}

/// Reparameterized sample z = mu + exp(logvar / 2) * eps with fresh
/// standard-normal noise.
pub fn sample_latent(
    tape: &mut Tape64,
    ids: &ModelIds,
    mu: TensorId,
    logvar: TensorId,
    rng: &mut impl Rng,
) -> Result<TensorId> {
    let z = ids.cfg.z_dim;
    let eps: Vec<f64> = (0..z).map(|_| standard_normal(rng)).collect();
    let eps = tape.constant(eps, &[1, z])?;
    reparameterize(tape, mu, logvar, eps)
}

/// The deterministic half of [`sample_latent`], for callers that freeze
/// their own noise.
pub fn reparameterize(
    tape: &mut Tape64,
    mu: TensorId,
    logvar: TensorId,
    eps: TensorId,
) -> Result<TensorId> {
    let half = tape.scale(logvar, 0.5);
    let sd = tape.exp(half);
    let noise = tape.mul(sd, eps)?;
    Ok(tape.add(mu, noise)?)
}

fn feed_forward(tape: &mut Tape64, ids: &ModelIds, prefix: &str, x: TensorId) -> Result<TensorId> {
    let h = tape.matmul(x, ids.id(&format!("{prefix}_w1")))?;
    let h = tape.add_row_bias(h, ids.id(&format!("{prefix}_b1")))?;
    let h = tape.gelu(h);
    let out = tape.matmul(h, ids.id(&format!("{prefix}_w2")))?;
    Ok(tape.add_row_bias(out, ids.id(&format!("{prefix}_b2")))?)
}

fn norm(tape: &mut Tape64, ids: &ModelIds, prefix: &str, x: TensorId) -> Result<TensorId> {
    Ok(tape.layer_norm(x, ids.id(&format!("{prefix}_g")), ids.id(&format!("{prefix}_b")), LN_EPS)?)
}

fn encoder(tape: &mut Tape64, ids: &ModelIds, mut x: TensorId) -> Result<TensorId> {
    // pre-norm residual blocks; trains stably without warmup
    for i in 0..ids.cfg.n_encoder_layers {
        let w = ids.attention(&format!("enc{i}_attn"));
        let normed = norm(tape, ids, &format!("enc{i}_ln1"), x)?;
        let attn = multi_head_attention(tape, normed, normed, normed, &w, ids.cfg.n_heads, None)?;
        x = tape.add(x, attn)?;
        let normed = norm(tape, ids, &format!("enc{i}_ln2"), x)?;
        let f = feed_forward(tape, ids, &format!("enc{i}_ffn"), normed)?;
        x = tape.add(x, f)?;
    }
    norm(tape, ids, "enc_final_ln", x)
}

fn decoder(tape: &mut Tape64, ids: &ModelIds, memory: TensorId) -> Result<TensorId> {
    let mut y = ids.id("queries");
    for i in 0..ids.cfg.n_decoder_layers {
        let ws = ids.attention(&format!("dec{i}_self"));
        let normed = norm(tape, ids, &format!("dec{i}_ln1"), y)?;
        let sa = multi_head_attention(tape, normed, normed, normed, &ws, ids.cfg.n_heads, None)?;
        y = tape.add(y, sa)?;
        let wc = ids.attention(&format!("dec{i}_cross"));
        let normed = norm(tape, ids, &format!("dec{i}_ln2"), y)?;
        let ca = multi_head_attention(tape, normed, memory, memory, &wc, ids.cfg.n_heads, None)?;
        y = tape.add(y, ca)?;
        let normed = norm(tape, ids, &format!("dec{i}_ln3"), y)?;
        let f = feed_forward(tape, ids, &format!("dec{i}_ffn"), normed)?;
        y = tape.add(y, f)?;
    }
    norm(tape, ids, "dec_final_ln", y)
}

/// Full pass from tokens and latent to a k x 4 action chunk: the latent
/// slot receives the projected z, the encoder reads the tokens, k learned
/// queries cross-attend to the encoder output, and the action head maps
/// each query to a pose.
pub fn forward(tape: &mut Tape64, ids: &ModelIds, tokens: TensorId, z: TensorId) -> Result<TensorId> {
    let n = tape.shape(tokens)[0];
    let latent_content = tape.matmul(z, ids.id("latent_w"))?;
    let head = tape.slice_rows(tokens, 0, n - 1)?;
    let slot = tape.slice_rows(tokens, n - 1, n)?;
    let slot = tape.add(slot, latent_content)?;
    let tokens = tape.concat_rows(&[head, slot])?;

    let memory = encoder(tape, ids, tokens)?;
    let decoded = decoder(tape, ids, memory)?;
    let out = tape.matmul(decoded, ids.id("action_w"))?;
    Ok(tape.add_row_bias(out, ids.id("action_b"))?)
}

/// Training objective: L1 reconstruction plus beta-weighted KL.
/// Returns (total, reconstruction, kl) node ids.
pub fn loss(
    tape: &mut Tape64,
    pred: TensorId,
    target: TensorId,
    mu: TensorId,
    logvar: TensorId,
    beta: f64,
) -> Result<(TensorId, TensorId, TensorId)> {
    let recon = tape.l1_loss(pred, target)?;
    let kl = tape.kl_gaussian(mu, logvar)?;
    let weighted = tape.scale(kl, beta);
    let total = tape.add(recon, weighted)?;
    Ok((total, recon, kl))
}

/// A model loaded onto a tape. Parameters live as the first leaves; every
/// forward pass builds on top and is dropped again via truncation, so one
/// session serves a whole training run or rollout.
pub struct PolicySession {
    pub tape: Tape64,
    ids: ModelIds,
    base: usize,
}

impl PolicySession {
    pub fn new(params: &ModelParams, trainable: bool) -> Result<Self> {
        params.config.validate()?;
        let mut tape = Tape64::new();
        let mut by_name = HashMap::new();
        let mut ordered = Vec::with_capacity(params.tensors.len());
        for t in &params.tensors {
            let id = tape.leaf(t.data.clone(), &t.shape, trainable)?;
            by_name.insert(t.name.clone(), id);
            ordered.push(id);
        }
        let base = tape.checkpoint();
        let ids = ModelIds { cfg: params.config.clone(), by_name, ordered };
        Ok(PolicySession { tape, ids, base })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.ids.cfg
    }

    pub fn ids(&self) -> &ModelIds {
        &self.ids
    }

    /// Parameter leaves in registry order (for the optimizer).
    pub fn param_ids(&self) -> &[TensorId] {
        self.ids.ordered()
    }

    /// Drop everything built since the parameter leaves.
    pub fn reset(&mut self) {
        self.tape.truncate(self.base);
    }

    /// Copy the (possibly updated) leaf values back out.
    pub fn export_params(&self, reference: &ModelParams) -> ModelParams {
        let mut out = reference.clone();
        for (t, &id) in out.tensors.iter_mut().zip(self.ids.ordered()) {
            t.data = self.tape.data(id).to_vec();
        }
        out.config = self.ids.cfg.clone();
        out
    }

    pub fn tokenize(&mut self, obs: &Observation) -> Result<TensorId> {
        tokenize(&mut self.tape, &self.ids, obs)
    }

    pub fn cvae_encode(&mut self, chunk: TensorId, proprio: TensorId) -> Result<(TensorId, TensorId)> {
        cvae_encode(&mut self.tape, &self.ids, chunk, proprio)
    }

    pub fn sample_latent(
        &mut self,
        mu: TensorId,
        logvar: TensorId,
        rng: &mut impl Rng,
    ) -> Result<TensorId> {
        sample_latent(&mut self.tape, &self.ids, mu, logvar, rng)
    }

    pub fn forward(&mut self, tokens: TensorId, z: TensorId) -> Result<TensorId> {
        forward(&mut self.tape, &self.ids, tokens, z)
    }

    pub fn loss(
        &mut self,
        pred: TensorId,
        target: TensorId,
        mu: TensorId,
        logvar: TensorId,
        beta: f64,
    ) -> Result<(TensorId, TensorId, TensorId)> {
        loss(&mut self.tape, pred, target, mu, logvar, beta)
    }

    /// Inference: forward with z = 0 (the prior mean), chunk clamped to
    /// the actuation range. The tape is reset around the call.
    pub fn predict(&mut self, obs: &Observation) -> Result<ActionChunk> {
        self.reset();
        let tokens = self.tokenize(obs)?;
        let z_dim = self.ids.cfg.z_dim;
        let z = self.tape.constant(vec![0.0; z_dim], &[1, z_dim])?;
        let out = self.forward(tokens, z)?;
        let data = self.tape.data(out);
        let chunk = (0..self.ids.cfg.chunk_k)
            .map(|i| Action::new(data[i * 4], data[i * 4 + 1], data[i * 4 + 2], data[i * 4 + 3]))
            .collect();
        self.reset();
        Ok(chunk)
    }
}

/// Standard normal via Box-Muller.
pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One-shot convenience around [`PolicySession::predict`].
pub fn predict(obs: &Observation, params: &ModelParams) -> Result<ActionChunk> {
    let mut session = PolicySession::new(params, false)?;
    session.predict(obs)
}
