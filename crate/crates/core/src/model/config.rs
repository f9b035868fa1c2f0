use crate::error::{invalid, Result};
use crate::model::LossWeights;
use crate::nn::AdamConfig;

/// Training hyperparameters. Defaults follow the full-scale setup: hidden
/// 512, embedding 64, vocabulary 40K, batch 256, Adam at 0.002, λ = (1, 0.01, 1),
/// generation capped at 15 tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub hidden_size: usize,
    pub embed_size: usize,
    pub vocab_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_gen_len: usize,
    /// Block gradients of the matching loss from reaching the auto-encoders.
    pub detach_j3: bool,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    /// Parameters start uniform in `[-init_range, init_range)`.
    pub init_range: f64,
    /// Training-time truncation of either side, before EOS.
    pub max_seq_len: usize,
    pub lowercase: bool,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.01,
            lambda3: 1.0,
            hidden_size: 512,
            embed_size: 64,
            vocab_size: 40_000,
            batch_size: 256,
            learning_rate: 0.002,
            max_gen_len: 15,
            detach_j3: true,
            seed: 1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
            init_range: 0.1,
            max_seq_len: crate::data::MAX_SEQ_LEN,
            lowercase: true,
            patience: 3,
            max_epochs: 50,
        }
    }
}

impl TrainingConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        for (name, v) in [
            ("hidden_size", self.hidden_size),
            ("embed_size", self.embed_size),
            ("batch_size", self.batch_size),
            ("max_seq_len", self.max_seq_len),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be positive"));
            }
        }
        if self.vocab_size <= crate::data::NUM_SPECIAL {
            return invalid("vocab_size must exceed the 4 reserved tokens");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 || self.clip_norm <= 0.0 || self.init_range <= 0.0 {
            return invalid("epsilon, clip_norm and init_range must be positive");
        }
        Ok(())
    }
}
