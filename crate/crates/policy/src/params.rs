use crate::{PolicyConfig, PolicyError, Result};
use rand::Rng;
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HIAM";

/// Image patching: 32x32 split into 4x4 patches of 8x8 pixels.
pub const PATCH_SIDE: usize = 8;
pub const PATCH_GRID: usize = 4;
pub const N_PATCHES: usize = PATCH_GRID * PATCH_GRID;
pub const PATCH_DIM: usize = PATCH_SIDE * PATCH_SIDE;

/// Positional-embedding rows, fixed even when the force token is dropped
/// so both ablation arms share an initialization. Row layout: image
/// patches 0..16, proprio 16, force 17, latent 18.
pub const POS_ROWS: usize = N_PATCHES + 3;
pub const POS_LATENT: usize = N_PATCHES + 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All learnable weights, in the registry order used by the checkpoint
/// format and the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: PolicyConfig,
    pub tensors: Vec<ParamTensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    /// Uniform in +-1/sqrt(fan_in).
    FanIn(usize),
    Zeros,
    Ones,
}

/// Registry of tensor names, shapes, and initializations for a config.
/// Checkpoint layout and Adam state indices both follow this order.
fn registry(cfg: &PolicyConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.d_model;
    let f = cfg.ffn_dim;
    let z = cfg.z_dim;
    let k = cfg.chunk_k;
    let mut r: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>, init: Init| {
        r.push((name.to_string(), shape, init));
    };

    push("patch_w", vec![PATCH_DIM, d], Init::FanIn(PATCH_DIM));
    push("patch_b", vec![d], Init::Zeros);
    push("proprio_w", vec![4, d], Init::FanIn(4));
    push("proprio_b", vec![d], Init::Zeros);
    push("force_w", vec![3, d], Init::FanIn(3));
    push("force_b", vec![d], Init::Zeros);
    push("latent_w", vec![z, d], Init::FanIn(z));
    push("pos_emb", vec![POS_ROWS, d], Init::FanIn(d));

    let attn = |prefix: String, r: &mut Vec<(String, Vec<usize>, Init)>| {
        for w in ["wq", "wk", "wv", "wo"] {
            r.push((format!("{prefix}_{w}"), vec![d, d], Init::FanIn(d)));
        }
        // no key bias: softmax rows are invariant to it
        for b in ["bq", "bv", "bo"] {
            r.push((format!("{prefix}_{b}"), vec![d], Init::Zeros));
        }
    };
    let norm = |prefix: String, r: &mut Vec<(String, Vec<usize>, Init)>| {
        r.push((format!("{prefix}_g"), vec![d], Init::Ones));
        r.push((format!("{prefix}_b"), vec![d], Init::Zeros));
    };
    let ffn = |prefix: String, r: &mut Vec<(String, Vec<usize>, Init)>| {
        r.push((format!("{prefix}_w1"), vec![d, f], Init::FanIn(d)));
        r.push((format!("{prefix}_b1"), vec![f], Init::Zeros));
        r.push((format!("{prefix}_w2"), vec![f, d], Init::FanIn(f)));
        r.push((format!("{prefix}_b2"), vec![d], Init::Zeros));
    };

    for i in 0..cfg.n_encoder_layers {
        attn(format!("enc{i}_attn"), &mut r);
        norm(format!("enc{i}_ln1"), &mut r);
        ffn(format!("enc{i}_ffn"), &mut r);
        norm(format!("enc{i}_ln2"), &mut r);
    }
    norm("enc_final_ln".to_string(), &mut r);
    for i in 0..cfg.n_decoder_layers {
        attn(format!("dec{i}_self"), &mut r);
        norm(format!("dec{i}_ln1"), &mut r);
        attn(format!("dec{i}_cross"), &mut r);
        norm(format!("dec{i}_ln2"), &mut r);
        ffn(format!("dec{i}_ffn"), &mut r);
        norm(format!("dec{i}_ln3"), &mut r);
    }
    norm("dec_final_ln".to_string(), &mut r);

    r.push(("queries".into(), vec![k, d], Init::FanIn(d)));
    r.push(("action_w".into(), vec![d, 4], Init::FanIn(d)));
    r.push(("action_b".into(), vec![4], Init::Zeros));

    let cvae_in = 4 * k + 4;
    r.push(("cvae_w1".into(), vec![cvae_in, d], Init::FanIn(cvae_in)));
    r.push(("cvae_b1".into(), vec![d], Init::Zeros));
    r.push(("cvae_mu_w".into(), vec![d, z], Init::FanIn(d)));
    r.push(("cvae_mu_b".into(), vec![z], Init::Zeros));
    r.push(("cvae_lv_w".into(), vec![d, z], Init::FanIn(d)));
    r.push(("cvae_lv_b".into(), vec![z], Init::Zeros));
    r
}

impl ModelParams {
    /// Fresh weights: matrices uniform in +-1/sqrt(fan_in), biases zero,
    /// norm gains one. Draw order follows the registry, so initialization
    /// is a pure function of (config, rng state).
    pub fn init(config: &PolicyConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let tensors = registry(config)
            .into_iter()
            .map(|(name, shape, init)| {
                let n: usize = shape.iter().product();
                let data = match init {
                    Init::FanIn(fan) => {
                        let bound = 1.0 / (fan as f64).sqrt();
                        (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
                    }
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                };
                ParamTensor { name, shape, data }
            })
            .collect();
        Ok(ModelParams { config: config.clone(), tensors })
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn tensor(&self, name: &str) -> &ParamTensor {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }
}

fn encode(params: &ModelParams) -> Vec<u8> {
    let cfg = &params.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.chunk_k as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.d_model as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.n_heads as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.n_encoder_layers as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.n_decoder_layers as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.ffn_dim as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.z_dim as u32).to_le_bytes());
    out.extend_from_slice(&cfg.beta_kl.to_le_bytes());
    out.push(cfg.haptic_enabled as u8);
    out.extend_from_slice(&cfg.lr.to_le_bytes());
    out.extend_from_slice(&cfg.train_steps.to_le_bytes());
    out.extend_from_slice(&(cfg.batch_size as u32).to_le_bytes());
    out.extend_from_slice(&cfg.rng_seed.to_le_bytes());
    out.extend_from_slice(&(params.tensors.len() as u32).to_le_bytes());
    for t in &params.tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &dim in &t.shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
    file: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(PolicyError::Truncated(self.file.to_string()));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8], file: &str) -> Result<ModelParams> {
    let mut r = Reader { bytes, offset: 0, file };
    if r.take(4)? != MAGIC {
        return Err(PolicyError::BadMagic(file.to_string()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(PolicyError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let config = PolicyConfig {
        chunk_k: r.u32()? as usize,
        d_model: r.u32()? as usize,
        n_heads: r.u32()? as usize,
        n_encoder_layers: r.u32()? as usize,
        n_decoder_layers: r.u32()? as usize,
        ffn_dim: r.u32()? as usize,
        z_dim: r.u32()? as usize,
        beta_kl: r.f64()?,
        haptic_enabled: r.u8()? != 0,
        lr: r.f64()?,
        train_steps: r.u32()?,
        batch_size: r.u32()? as usize,
        rng_seed: r.u64()?,
    };
    let n_tensors = r.u32()? as usize;
    let expected = registry(&config);
    if n_tensors != expected.len() {
        return Err(PolicyError::ConfigMismatch(format!(
            "{file}: {n_tensors} tensors, registry expects {}",
            expected.len()
        )));
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for (exp_name, exp_shape, _) in expected {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| PolicyError::ConfigMismatch(format!("{file}: invalid tensor name")))?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if name != exp_name || shape != exp_shape {
            return Err(PolicyError::ConfigMismatch(format!(
                "{file}: tensor {name} {shape:?} where {exp_name} {exp_shape:?} expected"
            )));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64()?);
        }
        tensors.push(ParamTensor { name, shape, data });
    }
    if r.offset != bytes.len() {
        return Err(PolicyError::ConfigMismatch(format!("{file}: trailing bytes")));
    }
    Ok(ModelParams { config, tensors })
}

/// Serialize a checkpoint; the byte stream is a pure function of the params.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path)?;
    decode(&bytes, &path.display().to_string())
}

/// Checkpoint bytes without touching disk (used for checksums).
pub fn checkpoint_bytes(params: &ModelParams) -> Vec<u8> {
    encode(params)
}
