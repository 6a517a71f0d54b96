use serde::{Deserialize, Serialize};

use crate::ftcadis::{AdvVariant, FinetuneConfig, SceMode};
use crate::net::LoraConfig;

/// Rows of the ablation matrix, each a modification of the base fine-tuning config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ours,
    /// Plain CE over every denoised copy, no adversarial term.
    CeBaseline,
    /// CE over every copy in the selective slot, adversarial term kept.
    NoSelection,
    NoMask,
    HardLabelMax,
    SoftLabelAvg,
    HardLabelAvg,
    /// Selection frozen after the first epoch.
    FreezeSelection,
    /// Adapter-only fine-tuning with the full objective.
    Lora,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        use Variant::*;
        vec![
            Ours,
            CeBaseline,
            NoSelection,
            NoMask,
            HardLabelMax,
            SoftLabelAvg,
            HardLabelAvg,
            FreezeSelection,
            Lora,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ours => "ours",
            Variant::CeBaseline => "ce_baseline",
            Variant::NoSelection => "no_selection",
            Variant::NoMask => "no_mask",
            Variant::HardLabelMax => "hard_label_max",
            Variant::SoftLabelAvg => "soft_label_avg",
            Variant::HardLabelAvg => "hard_label_avg",
            Variant::FreezeSelection => "freeze_selection",
            Variant::Lora => "lora",
        }
    }

    /// `base` with this variant's changes; `base` is expected to describe the full method.
    pub fn apply(self, base: &FinetuneConfig) -> FinetuneConfig {
        let mut c = base.clone();
        match self {
            Variant::Ours => {}
            Variant::CeBaseline => c = c.ce_baseline(),
            Variant::NoSelection => c.sce_mode = SceMode::All,
            Variant::NoMask => c.mask = false,
            Variant::HardLabelMax => c.adv_variant = AdvVariant::HardLabelMax,
            Variant::SoftLabelAvg => c.adv_variant = AdvVariant::SoftLabelAvg,
            Variant::HardLabelAvg => c.adv_variant = AdvVariant::HardLabelAvg,
            Variant::FreezeSelection => c.update_selection = false,
            Variant::Lora => {
                if c.lora.is_none() {
                    c.lora = Some(LoraConfig::default());
                }
            }
        }
        c
    }
}

/// Report label for a fine-tuning config.
///
/// Only CE over every copy without the adversarial term is the CE baseline;
/// selective CE without it is `sce_only`.
pub fn method_label(config: &FinetuneConfig) -> &'static str {
    if !config.adversarial_enabled() {
        match config.sce_mode {
            SceMode::All => "ce_baseline",
            SceMode::Selective => "sce_only",
        }
    } else if config.lora.is_some() {
        "ftcadis_lora"
    } else {
        "ftcadis"
    }
}
