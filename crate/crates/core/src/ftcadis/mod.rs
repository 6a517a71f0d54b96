//! Confidence-aware fine-tuning on denoised copies.
//!
//! Each clean sample gets `M` noise-and-denoise copies. Copies the current
//! classifier labels correctly form the non-hallucinated set; the selective
//! cross-entropy trains on those only (divided by `M`), and the adversarial
//! KL term runs only when all `M` copies are correct.

mod config;
mod losses;
mod train;

pub use config::{
    default_lambda, AdvVariant, EpsSchedule, FinetuneConfig, PretrainConfig, SceMode,
};
pub use losses::{
    adversarial_surrogate, ce_baseline_loss, consistency_target, madv_loss, one_hot, pgd_attack,
    sce_loss, select_non_hallucinated, AdvSettings, LossOutput, MadvOutput, SceOutput,
    SelectionResult,
};
pub use train::{
    accuracy, finetune, finetune_with_hook, ftcadis_step_loss, ftcadis_step_loss_with, pretrain,
    EpochStats, PretrainReport, StepDiagnostics, StepOutput, TrainReport, TRAIN_REPORT_VERSION,
};
