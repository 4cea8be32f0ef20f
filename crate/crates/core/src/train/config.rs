use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::nn::EncoderConfig;
use crate::optim::{AdamConfig, CosineSchedule};

/// Architecture hyperparameters. The output layer has `vocab_size + 1`
/// classes, the last one being the CTC blank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub gru_layers: usize,
    pub gru_hidden: usize,
    pub vocab_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            gru_layers: 2,
            gru_hidden: 256,
            vocab_size: 0,
        }
    }
}

impl ModelConfig {
    pub fn num_classes(&self) -> usize {
        self.vocab_size + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.gru_layers == 0 || self.gru_hidden == 0 {
            return Err(Error::Config("the recurrent stack needs at least one layer and one unit".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocabulary size must be positive".into()));
        }
        Ok(())
    }
}

/// Optimization recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_iters: u64,
    pub base_lr: f64,
    pub min_lr: f64,
    pub adam: AdamConfig,
    pub eval_every: u64,
    pub log_every: u64,
    pub augment: bool,
    pub augmentation: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let s = CosineSchedule::default();
        TrainConfig {
            batch_size: 16,
            max_iters: s.max_iters,
            base_lr: s.base_lr,
            min_lr: s.min_lr,
            adam: AdamConfig::default(),
            eval_every: 500,
            log_every: 50,
            augment: true,
            augmentation: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> CosineSchedule {
        CosineSchedule {
            base_lr: self.base_lr,
            min_lr: self.min_lr,
            max_iters: self.max_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.base_lr >= 0.0 && self.min_lr >= 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        self.augmentation.validate()
    }
}
