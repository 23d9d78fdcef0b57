use crate::{DataError, Dataset, Episode, Result, StepRecord};
use hiact_sim_env::{EnvConfig, IMAGE_PIXELS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HIA1";

/// Bytes per recorded step: image + force + proprio + action, all f32.
const FLOATS_PER_STEP: usize = IMAGE_PIXELS + 3 + 4 + 4;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEpisode {
    file: String,
    sha256: String,
    length: u32,
    is_recovery: bool,
    pick_success: bool,
    delivery_success: bool,
    target_tube: u8,
    config: EnvConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    n_success: u32,
    n_recovery: u32,
    base_seed: u64,
    recovery_fraction: f64,
    total_discards: u32,
    episodes: Vec<ManifestEpisode>,
}

fn flag_bits(e: &Episode) -> u8 {
    (e.is_recovery as u8) | ((e.pick_success as u8) << 1) | ((e.delivery_success as u8) << 2)
}

/// Episode file layout (little-endian):
/// magic "HIA1" | length u32 | flag bits u8 | target_tube u8 |
/// image f32[T*1024] | force f32[T*3] | proprio f32[T*4] | action f32[T*4]
fn encode_episode(e: &Episode) -> Vec<u8> {
    let t = e.steps.len();
    let mut out = Vec::with_capacity(10 + t * FLOATS_PER_STEP * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.push(flag_bits(e));
    out.push(e.target_tube);
    for step in &e.steps {
        for &v in &step.image {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for step in &e.steps {
        for &v in &step.force {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for step in &e.steps {
        for &v in &step.proprio {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for step in &e.steps {
        for &v in &step.action {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_episode(bytes: &[u8], file: &str, meta: &ManifestEpisode) -> Result<Episode> {
    if bytes.len() < 10 {
        return Err(DataError::Truncated { file: file.into(), expected: 10, found: bytes.len() });
    }
    if &bytes[0..4] != MAGIC {
        return Err(DataError::BadMagic { file: file.into() });
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let flags = bytes[8];
    let target_tube = bytes[9];
    let expected = 10 + t * FLOATS_PER_STEP * 4;
    if bytes.len() != expected {
        return Err(DataError::Truncated { file: file.into(), expected, found: bytes.len() });
    }
    let is_recovery = flags & 1 != 0;
    let pick_success = flags & 2 != 0;
    let delivery_success = flags & 4 != 0;
    if t as u32 != meta.length
        || is_recovery != meta.is_recovery
        || pick_success != meta.pick_success
        || delivery_success != meta.delivery_success
        || target_tube != meta.target_tube
    {
        return Err(DataError::ManifestMismatch(format!(
            "{file}: header disagrees with manifest entry"
        )));
    }

    let mut offset = 10;
    let mut read_f32 = |n: usize| -> Vec<f32> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()));
            offset += 4;
        }
        v
    };
    let image = read_f32(t * IMAGE_PIXELS);
    let force = read_f32(t * 3);
    let proprio = read_f32(t * 4);
    let action = read_f32(t * 4);

    let steps = (0..t)
        .map(|i| StepRecord {
            image: image[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS].to_vec(),
            force: force[i * 3..(i + 1) * 3].try_into().unwrap(),
            proprio: proprio[i * 4..(i + 1) * 4].try_into().unwrap(),
            action: action[i * 4..(i + 1) * 4].try_into().unwrap(),
        })
        .collect();

    Ok(Episode {
        config: meta.config.clone(),
        steps,
        is_recovery,
        pick_success,
        delivery_success,
        target_tube,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write one binary file per episode plus `manifest.json`. Two saves of the
/// same dataset produce byte-identical trees.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(dataset.episodes.len());
    for (i, episode) in dataset.episodes.iter().enumerate() {
        let file = format!("episode_{i:04}.bin");
        let bytes = encode_episode(episode);
        fs::write(dir.join(&file), &bytes)?;
        entries.push(ManifestEpisode {
            file,
            sha256: sha256_hex(&bytes),
            length: episode.steps.len() as u32,
            is_recovery: episode.is_recovery,
            pick_success: episode.pick_success,
            delivery_success: episode.delivery_success,
            target_tube: episode.target_tube,
            config: episode.config.clone(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n_success: dataset.n_success,
        n_recovery: dataset.n_recovery,
        base_seed: dataset.base_seed,
        recovery_fraction: dataset.recovery_fraction(),
        total_discards: dataset.total_discards,
        episodes: entries,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Load and fully validate a dataset directory: format version, per-file
/// checksums, header consistency.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if manifest.episodes.len() as u32 != manifest.n_success + manifest.n_recovery {
        return Err(DataError::ManifestMismatch(format!(
            "episode count {} does not match counts {} + {}",
            manifest.episodes.len(),
            manifest.n_success,
            manifest.n_recovery
        )));
    }
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for meta in &manifest.episodes {
        let bytes = fs::read(dir.join(&meta.file))?;
        if sha256_hex(&bytes) != meta.sha256 {
            return Err(DataError::Checksum { file: meta.file.clone() });
        }
        episodes.push(decode_episode(&bytes, &meta.file, meta)?);
    }
    Ok(Dataset {
        episodes,
        n_success: manifest.n_success,
        n_recovery: manifest.n_recovery,
        base_seed: manifest.base_seed,
        total_discards: manifest.total_discards,
    })
}
