use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::AdamConfig;
use crate::encoder::EncoderConfig;
use crate::error::{Result, VidError};

/// Every hyper-parameter of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Softmax temperature for pseudo-labels and soft-target losses.
    pub temperature: f64,
    /// Weight of the teacher term during fine-tuning.
    pub lambda: f64,
    pub teacher_epochs: usize,
    pub distill_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    /// Dropout rate inside the encoder and on the head input while training.
    pub dropout: f64,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub optimizer: AdamConfig,
    /// Update encoder weights during fine-tuning; when false only the head moves.
    pub finetune_full_model: bool,
    /// Assert teacher immutability and label-transfer round trips inside the pipeline.
    pub check_invariants: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            lambda: 0.5,
            teacher_epochs: 5,
            distill_epochs: 5,
            finetune_epochs: 1,
            batch_size: 32,
            dropout: 0.1,
            seed: 0,
            encoder: EncoderConfig::default(),
            optimizer: AdamConfig::default(),
            finetune_full_model: true,
            check_invariants: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(VidError::Parameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(VidError::Parameter(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(VidError::Parameter(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.batch_size == 0 {
            return Err(VidError::Parameter("batch_size must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(VidError::Parameter(format!("invalid optimizer settings {o:?}")));
        }
        self.encoder.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Independent seed for a named component of a run.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.temperature, 2.0);
        assert_eq!(c.lambda, 0.5);
        assert_eq!((c.teacher_epochs, c.distill_epochs, c.finetune_epochs), (5, 5, 1));
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.optimizer.lr, 1e-3);
        c.validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { lambda: 0.0, ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_out_of_range() {
        for bad in [
            ExperimentConfig { lambda: 1.5, ..Default::default() },
            ExperimentConfig { temperature: 0.0, ..Default::default() },
            ExperimentConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }
}
