use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mode::Mode;
use crate::{Error, Result};

/// Layer sizes of every module. Hidden layers use ReLU, outputs are linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub dim_e1: usize,
    pub dim_e2: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub predictor_hidden: Vec<usize>,
    pub disentangler_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    /// Full-size architecture for 512-dimensional input embeddings.
    fn default() -> Self {
        Self {
            dim_e1: 128,
            dim_e2: 32,
            encoder_hidden: vec![512, 512],
            decoder_hidden: vec![512, 512],
            predictor_hidden: vec![256, 512],
            disentangler_hidden: vec![128, 128],
            discriminator_hidden: vec![64],
        }
    }
}

impl ArchConfig {
    /// Quarter-width layers with the same e1:e2 ratio, sized for the
    /// 64-dimensional synthetic presets on a single core. The discriminator
    /// gets an extra layer so the adversary can keep up with the encoder.
    pub fn compact() -> Self {
        Self {
            dim_e1: 64,
            dim_e2: 16,
            encoder_hidden: vec![128, 128],
            decoder_hidden: vec![128, 128],
            predictor_hidden: vec![64, 128],
            disentangler_hidden: vec![32, 32],
            discriminator_hidden: vec![64, 64],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_e1 == 0 || self.dim_e2 == 0 {
            return Err(Error::param("e1 and e2 dimensions must be at least 1"));
        }
        let all = [
            &self.encoder_hidden,
            &self.decoder_hidden,
            &self.predictor_hidden,
            &self.disentangler_hidden,
            &self.discriminator_hidden,
        ];
        if all.iter().any(|h| h.contains(&0)) {
            return Err(Error::param("hidden layers must have at least one unit"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Weight of the speaker prediction loss.
    pub alpha: f64,
    /// Weight of the reconstruction loss.
    pub beta: f64,
    /// Weight of the disentangler losses.
    pub gamma: f64,
    /// Weight of the group discriminator loss.
    pub delta: f64,
    /// Dropout probability applied to e1 before the decoder.
    pub p_drop: f64,
    pub batch: usize,
    pub lr_primary: f64,
    pub lr_secondary: f64,
    pub weight_decay: f64,
    pub secondary_steps_per_primary: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of each speaker's utterances held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::UaiMtl,
            alpha: 100.0,
            beta: 5.0,
            gamma: 100.0,
            delta: 50.0,
            p_drop: 0.75,
            batch: 128,
            lr_primary: 1e-3,
            lr_secondary: 1e-4,
            weight_decay: 1e-4,
            secondary_steps_per_primary: 10,
            max_epochs: 200,
            patience: 10,
            val_fraction: 0.2,
            seed: 0,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("weight_decay", self.weight_decay),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param(format!("{name} must be a non-negative number, got {w}")));
            }
        }
        for (name, lr) in [("lr_primary", self.lr_primary), ("lr_secondary", self.lr_secondary)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(Error::param(format!("p_drop {} outside [0, 1)", self.p_drop)));
        }
        if self.batch == 0 || self.secondary_steps_per_primary == 0 || self.max_epochs == 0 {
            return Err(Error::param(
                "batch, secondary_steps_per_primary and max_epochs must be at least 1",
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::param("val_fraction must be in [0, 1)"));
        }
        self.arch.validate()
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}
