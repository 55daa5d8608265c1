//! Classifier checkpoints: a directory holding a JSON manifest and one raw
//! little-endian `f64` parameter file. The manifest is written last, so a
//! directory without one is an interrupted save.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::classifier::{Classifier, Readout};
use super::config::hex;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Result, VidError};
use crate::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub readout: String,
    pub config_hash: String,
    pub encoder: EncoderConfig,
    pub vocab_size: usize,
    pub tensors: Vec<TensorEntry>,
    pub params_file: String,
    pub params_sha256: String,
}

/// Options for [`load_checkpoint`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions<'a> {
    /// Config hash the checkpoint must have been trained under.
    pub expect_config_hash: Option<&'a str>,
    /// Vocabulary size the embedding table must match.
    pub expect_vocab_size: Option<usize>,
    /// Accept a config-hash mismatch.
    pub force: bool,
}

pub fn save_checkpoint(model: &Classifier, dir: &Path, config_hash: &str) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let named = model.named_tensors();
    let mut bytes = Vec::with_capacity(named.iter().map(|(_, t)| t.numel() * 8).sum());
    for (_, t) in &named {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = hex(&Sha256::digest(&bytes));
    let params_file = format!("params-{}.bin", &digest[..8]);
    write_atomic(&dir.join(&params_file), &bytes)?;
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        readout: model.readout().tag().to_string(),
        config_hash: config_hash.to_string(),
        encoder: model.encoder.config,
        vocab_size: model.encoder.vocab_size(),
        tensors: named
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        params_file,
        params_sha256: digest,
    };
    write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| VidError::Schema(format!("cannot read checkpoint manifest {}: {e}", path.display())))?;
    let m: CheckpointManifest = serde_json::from_str(&text)?;
    if m.format_version != FORMAT_VERSION {
        return Err(VidError::Schema(format!(
            "unsupported checkpoint format {} (expected {FORMAT_VERSION})",
            m.format_version
        )));
    }
    Ok(m)
}

pub fn load_checkpoint(dir: &Path, opts: &LoadOptions) -> Result<Classifier> {
    let m = read_manifest(dir)?;
    if let Some(expected) = opts.expect_config_hash {
        if expected != m.config_hash && !opts.force {
            return Err(VidError::ConfigMismatch {
                expected: expected.to_string(),
                found: m.config_hash.clone(),
            });
        }
    }
    if let Some(v) = opts.expect_vocab_size {
        if v != m.vocab_size {
            return Err(VidError::Schema(format!(
                "checkpoint embeds {} tokens but the vocabulary has {v}",
                m.vocab_size
            )));
        }
    }
    let readout = Readout::from_tag(&m.readout)
        .ok_or_else(|| VidError::Schema(format!("unknown readout {:?}", m.readout)))?;
    m.encoder.validate()?;

    let bytes = fs::read(dir.join(&m.params_file))?;
    if hex(&Sha256::digest(&bytes)) != m.params_sha256 {
        return Err(VidError::Schema(format!("{} does not match its recorded hash", m.params_file)));
    }

    // Build a correctly shaped model, then overwrite every tensor in order.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let encoder = EncoderParams::init(m.encoder, m.vocab_size, &mut rng)?;
    let mut model = Classifier::new(encoder, readout, &mut rng);
    let expected: Vec<(String, Vec<usize>)> = model
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    let recorded: Vec<(String, Vec<usize>)> = m.tensors.iter().map(|t| (t.name.clone(), t.shape.clone())).collect();
    if expected != recorded {
        return Err(VidError::Schema("checkpoint tensor list does not match the model layout".into()));
    }
    let total: usize = recorded.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if bytes.len() != total * 8 {
        return Err(VidError::Schema(format!(
            "parameter file holds {} bytes, layout needs {}",
            bytes.len(),
            total * 8
        )));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for t in model.tensors_mut() {
        for v in t.data_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok(model)
}
