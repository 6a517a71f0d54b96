//! Pipeline stages shared by the command handlers, the examples and the tests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::variant::{method_label, Variant};
use crate::certify::{evaluate, DenoisedPipeline, EvalReport};
use crate::error::Result;
use crate::ftcadis::{finetune_with_hook, pretrain, EpochStats, FinetuneConfig, TrainReport};
use crate::io::{read_versioned, write_json};
use crate::net::Classifier;
use crate::numerics::{derive_seed, RngStream};
use crate::world::{sample_dataset, Dataset, DiffusionSchedule, NoiseAndDenoise};

/// File locations under an output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn train_data(&self) -> PathBuf {
        self.root.join("data/train.json")
    }

    pub fn test_data(&self) -> PathBuf {
        self.root.join("data/test.json")
    }

    pub fn pretrain_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints/pretrain.json")
    }

    pub fn finetune_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints/finetune.json")
    }

    pub fn epoch_checkpoint(&self, epoch: usize) -> PathBuf {
        self.root
            .join(format!("checkpoints/finetune_epoch{epoch:03}.json"))
    }

    pub fn pretrain_report(&self) -> PathBuf {
        self.root.join("reports/pretrain.json")
    }

    pub fn train_report(&self) -> PathBuf {
        self.root.join("reports/train.json")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.root.join("reports/eval.json")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("reports/summary.csv")
    }

    pub fn ablation_run(&self, variant: Variant, seed: u64) -> PathBuf {
        self.root
            .join(format!("ablate/{}_seed{seed}", variant.name()))
    }

    pub fn ablation_csv(&self) -> PathBuf {
        self.root.join("reports/ablation.csv")
    }
}

pub const PRETRAIN_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub format_version: u32,
    pub kind: String,
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl PretrainSummary {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path, "pretrain report", PRETRAIN_REPORT_VERSION)
    }
}

fn root_stream(cfg: &ExperimentConfig) -> RngStream {
    RngStream::root(cfg.seed)
}

/// Train and test sets drawn from the `data` stream of the top-level seed.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let world = cfg.world.build()?;
    let data = root_stream(cfg).derive_named("data");
    let train = sample_dataset(&world, cfg.data.n_train, &data.derive_named("train"))?;
    let test = sample_dataset(&world, cfg.data.n_test, &data.derive_named("test"))?;
    Ok((
        Dataset::new(world.clone(), train),
        Dataset::new(world, test),
    ))
}

pub fn build_denoiser(
    cfg: &ExperimentConfig,
    world: &crate::world::MixtureSpec,
) -> Result<NoiseAndDenoise> {
    let schedule = DiffusionSchedule::from_config(&cfg.schedule)?;
    NoiseAndDenoise::new(world.clone(), schedule, cfg.finetune.sigma)
}

pub fn pretrain_stage(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Classifier, PretrainSummary)> {
    let mut pcfg = cfg.pretrain.clone();
    pcfg.seed = derive_seed(cfg.seed, "pretrain");
    let (clf, report) = pretrain(&train.samples, &cfg.net, &pcfg)?;
    let test_accuracy = crate::ftcadis::accuracy(&clf, &test.samples)?;
    Ok((
        clf,
        PretrainSummary {
            format_version: PRETRAIN_REPORT_VERSION,
            kind: "pretrain_report".into(),
            epoch_losses: report.epoch_losses,
            train_accuracy: report.train_accuracy,
            test_accuracy,
        },
    ))
}

/// The config's fine-tuning settings with the phase seed filled in.
pub fn seeded_finetune_config(cfg: &ExperimentConfig, ft: &FinetuneConfig) -> FinetuneConfig {
    let mut c = ft.clone();
    c.seed = derive_seed(cfg.seed, "finetune");
    c
}

pub fn finetune_stage(
    cfg: &ExperimentConfig,
    ft: &FinetuneConfig,
    base: Classifier,
    train: &Dataset,
    on_epoch: impl FnMut(&Classifier, &EpochStats) -> Result<()>,
) -> Result<(Classifier, TrainReport)> {
    let denoiser = build_denoiser(cfg, &train.world)?;
    finetune_with_hook(
        base,
        &train.samples,
        &seeded_finetune_config(cfg, ft),
        &denoiser,
        on_epoch,
    )
}

pub fn certify_stage(
    cfg: &ExperimentConfig,
    clf: &Classifier,
    test: &Dataset,
    method: &str,
) -> Result<EvalReport> {
    let denoiser = build_denoiser(cfg, &test.world)?;
    let pipeline = DenoisedPipeline::new(clf, &denoiser)?;
    let stream = root_stream(cfg).derive_named("certify");
    evaluate(&pipeline, &test.samples, &cfg.certify, method, &stream)
}

/// Fine-tunes `base` under one ablation variant and certifies the result.
pub fn run_variant(
    cfg: &ExperimentConfig,
    variant: Variant,
    base: &Classifier,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Classifier, TrainReport, EvalReport)> {
    let ft = variant.apply(&cfg.finetune);
    let (clf, report) = finetune_stage(cfg, &ft, base.clone(), train, |_, _| Ok(()))?;
    let eval = certify_stage(cfg, &clf, test, variant.name())?;
    Ok((clf, report, eval))
}

pub fn finetune_method(cfg: &ExperimentConfig) -> &'static str {
    method_label(&cfg.finetune)
}
