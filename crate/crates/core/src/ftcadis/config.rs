use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::LoraConfig;

/// Target and reduction used by the masked adversarial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvVariant {
    /// Soft consistency target, max over copies.
    #[default]
    Ours,
    /// One-hot label target, max over copies.
    HardLabelMax,
    /// Soft target, mean over copies.
    SoftLabelAvg,
    /// One-hot target, mean over copies.
    HardLabelAvg,
    /// No adversarial term.
    None,
}

impl AdvVariant {
    pub fn uses_soft_target(self) -> bool {
        matches!(self, AdvVariant::Ours | AdvVariant::SoftLabelAvg)
    }

    pub fn uses_max(self) -> bool {
        matches!(self, AdvVariant::Ours | AdvVariant::HardLabelMax)
    }
}

/// What fills the cross-entropy slot of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceMode {
    /// Only non-hallucinated copies, divided by M.
    #[default]
    Selective,
    /// Every copy (plain denoised cross-entropy).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpsSchedule {
    /// Epsilon doubles for every epoch index `>= double_after_epoch`.
    pub double_after_epoch: usize,
}

/// Fine-tuning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    pub sigma: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    pub epochs: usize,
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "yes")]
    pub cold_start: bool,
    #[serde(default = "yes")]
    pub update_selection: bool,
    #[serde(default)]
    pub adv_variant: AdvVariant,
    #[serde(default)]
    pub sce_mode: SceMode,
    /// Apply the all-copies-correct mask to the adversarial term.
    #[serde(default = "yes")]
    pub mask: bool,
    #[serde(default)]
    pub eps_schedule: Option<EpsSchedule>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// When set, adapters are attached and only they (plus the head) train.
    #[serde(default)]
    pub lora: Option<LoraConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

fn default_m() -> usize {
    4
}

fn default_t_steps() -> usize {
    4
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_batch() -> usize {
    32
}

/// `λ` for the three standard smoothing levels (1, 2, 4 for σ = 0.25, 0.5, 1.0).
pub fn default_lambda(sigma: f64) -> f64 {
    if sigma <= 0.375 {
        1.0
    } else if sigma <= 0.75 {
        2.0
    } else {
        4.0
    }
}

impl FinetuneConfig {
    /// Defaults: M = 4, T = 4, ε = 0.25, λ by σ.
    pub fn for_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            m: default_m(),
            lambda: default_lambda(sigma),
            epsilon: default_epsilon(),
            t_steps: default_t_steps(),
            epochs: 10,
            lr: 1e-3,
            weight_decay: 0.0,
            cold_start: true,
            update_selection: true,
            adv_variant: AdvVariant::Ours,
            sce_mode: SceMode::Selective,
            mask: true,
            eps_schedule: None,
            batch_size: default_batch(),
            lora: None,
            seed: 0,
        }
    }

    /// Plain cross-entropy over all denoised copies.
    pub fn ce_baseline(mut self) -> Self {
        self.sce_mode = SceMode::All;
        self.adv_variant = AdvVariant::None;
        self.lambda = 0.0;
        self
    }

    pub fn is_ce_baseline(&self) -> bool {
        self.sce_mode == SceMode::All
            && (self.adv_variant == AdvVariant::None || self.lambda == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config("finetune.sigma must be positive"));
        }
        if self.m == 0 {
            return Err(Error::config("finetune.m must be >= 1"));
        }
        if self.t_steps == 0 {
            return Err(Error::config("finetune.t_steps must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("finetune.epsilon must be > 0"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("finetune.lambda must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("finetune.batch_size must be >= 1"));
        }
        if !(self.lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config(
                "finetune.lr and finetune.weight_decay must be >= 0",
            ));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, epoch: usize) -> f64 {
        match self.eps_schedule {
            Some(s) if epoch >= s.double_after_epoch => 2.0 * self.epsilon,
            _ => self.epsilon,
        }
    }

    pub fn adversarial_enabled(&self) -> bool {
        self.adv_variant != AdvVariant::None && self.lambda > 0.0
    }
}

/// Clean-data training of the base classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("pretrain.batch_size must be >= 1"));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::config("pretrain.lr must be >= 0"));
        }
        Ok(())
    }
}
