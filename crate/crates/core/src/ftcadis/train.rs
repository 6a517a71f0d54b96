use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FinetuneConfig, PretrainConfig, SceMode};
use super::losses::{
    ce_baseline_loss, madv_loss, sce_loss, select_non_hallucinated, AdvSettings, LossOutput,
    SelectionResult,
};
use crate::error::{Error, Result};
use crate::io::{csv_string, read_versioned, write_json, write_text};
use crate::net::{optimizer_step, AdamState, AdamW, Classifier, GradientBundle, Loss, MlpSpec};
use crate::numerics::RngStream;
use crate::world::{LabeledSample, NoiseAndDenoise};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Copies classified correctly, before any cold-start fallback.
    pub nh_count: usize,
    /// The adversarial term was applied to this sample.
    pub mask_active: bool,
    pub cold_start_used: bool,
    pub sce: f64,
    pub madv: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: LossOutput,
    pub diagnostics: StepDiagnostics,
    pub selection: SelectionResult,
}

/// Full objective for one clean sample: `L_SCE + λ · L_MAdv`.
///
/// Copy `i` draws its noise from `stream.derive(i)`.
pub fn ftcadis_step_loss(
    clf: &Classifier,
    sample: &LabeledSample,
    config: &FinetuneConfig,
    denoiser: &NoiseAndDenoise,
    stream: &RngStream,
) -> Result<StepOutput> {
    ftcadis_step_loss_with(clf, sample, config, denoiser, stream, None)
}

/// Like [`ftcadis_step_loss`], reusing a frozen selection (copies and
/// membership) instead of drawing fresh copies when one is given.
pub fn ftcadis_step_loss_with(
    clf: &Classifier,
    sample: &LabeledSample,
    config: &FinetuneConfig,
    denoiser: &NoiseAndDenoise,
    stream: &RngStream,
    frozen: Option<&SelectionResult>,
) -> Result<StepOutput> {
    if denoiser.sigma() != config.sigma {
        return Err(Error::config(format!(
            "denoiser sigma {} differs from finetune.sigma {}",
            denoiser.sigma(),
            config.sigma
        )));
    }
    let selection = match frozen {
        Some(sel) => sel.clone(),
        None => {
            let copies = (0..config.m)
                .map(|i| denoiser.apply(&sample.x, &stream.derive(i as u64)))
                .collect::<Result<Vec<_>>>()?;
            select_non_hallucinated(clf, copies, sample.y, config.cold_start)?
        }
    };
    let ce_part = match config.sce_mode {
        SceMode::Selective => sce_loss(clf, &selection, sample.y)?.loss,
        SceMode::All => ce_baseline_loss(clf, &selection.denoised, sample.y)?,
    };
    let mut total = ce_part.clone();
    let mut madv_value = 0.0;
    let mut mask_active = false;
    if config.adversarial_enabled() {
        let settings = AdvSettings {
            variant: config.adv_variant,
            epsilon: config.epsilon,
            t_steps: config.t_steps,
            mask: config.mask,
        };
        let adv = madv_loss(clf, &sample.x, sample.y, &selection, &settings)?;
        mask_active = adv.active;
        madv_value = adv.loss.value;
        total.value += config.lambda * adv.loss.value;
        total.grads.add_scaled(&adv.loss.grads, config.lambda);
    }
    let diagnostics = StepDiagnostics {
        nh_count: selection.correct_count(),
        mask_active,
        cold_start_used: selection.cold_start_used,
        sce: ce_part.value,
        madv: madv_value,
        total: total.value,
    };
    Ok(StepOutput {
        loss: total,
        diagnostics,
        selection,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub epsilon: f64,
    pub sce: f64,
    pub madv: f64,
    pub total: f64,
    /// Fraction of clean samples whose copies were all classified correctly.
    pub mask_ratio: f64,
    pub cold_start_ratio: f64,
    /// `nh_histogram[j]` counts samples with exactly `j` correct copies.
    pub nh_histogram: Vec<usize>,
}

pub const TRAIN_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format_version: u32,
    pub kind: String,
    pub trainable_params: usize,
    pub base_params: usize,
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .epochs
            .iter()
            .map(|e| {
                vec![
                    e.epoch.to_string(),
                    e.sce.to_string(),
                    e.madv.to_string(),
                    e.total.to_string(),
                    e.mask_ratio.to_string(),
                    e.nh_histogram
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                ]
            })
            .collect();
        csv_string(
            &[
                "epoch",
                "sce",
                "madv",
                "total",
                "mask_ratio",
                "nh_histogram",
            ],
            &rows,
        )
    }

    /// Writes `<stem>.json` and `<stem>.csv` next to each other.
    pub fn save(&self, json_path: &Path) -> Result<()> {
        write_json(json_path, self)?;
        write_text(&json_path.with_extension("csv"), &self.csv()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path, "train report", TRAIN_REPORT_VERSION)
    }
}

fn shuffled(n: usize, stream: &RngStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.generator());
    order
}

fn check_finite(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("loss is {value} at {}", what())))
    }
}

fn sum_in_order(clf: &Classifier, parts: &[GradientBundle]) -> GradientBundle {
    let mut acc = GradientBundle::zeros_like(clf);
    let w = 1.0 / parts.len() as f64;
    for g in parts {
        acc.add_scaled(g, w);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
}

pub fn accuracy(clf: &Classifier, data: &[LabeledSample]) -> Result<f64> {
    let hits = data
        .par_iter()
        .map(|s| clf.predict(&s.x).map(|p| usize::from(p == s.y)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Cross-entropy training on clean samples, starting from a fresh init.
pub fn pretrain(
    dataset: &[LabeledSample],
    spec: &MlpSpec,
    config: &PretrainConfig,
) -> Result<(Classifier, PretrainReport)> {
    if dataset.is_empty() {
        return Err(Error::domain("pretrain dataset is empty"));
    }
    config.validate()?;
    let mut clf = Classifier::init(spec.clone(), config.seed, None)?;
    let hyper = AdamW::new(config.lr, config.weight_decay);
    let mut state = AdamState::default();
    let root = RngStream::root(config.seed).derive_named("pretrain");
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = shuffled(dataset.len(), &root.derive(epoch as u64));
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let parts = batch
                .par_iter()
                .map(|&i| {
                    let s = &dataset[i];
                    let trace = clf.forward(&s.x)?;
                    clf.backward(&trace, &Loss::CrossEntropy { class: s.y })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads = Vec::with_capacity(parts.len());
            for (&i, (v, g)) in batch.iter().zip(parts) {
                check_finite(v, || format!("pretrain epoch {epoch}, sample {i}"))?;
                loss_sum += v;
                grads.push(g);
            }
            let step = sum_in_order(&clf, &grads);
            optimizer_step(&mut clf, &step, &mut state, &hyper)?;
        }
        epoch_losses.push(loss_sum / dataset.len() as f64);
    }
    let train_accuracy = accuracy(&clf, dataset)?;
    Ok((
        clf,
        PretrainReport {
            epoch_losses,
            train_accuracy,
        },
    ))
}

/// Fine-tunes `clf` on denoised copies of `dataset` with the configured objective.
///
/// `on_epoch` runs after every completed epoch so callers can checkpoint.
pub fn finetune_with_hook(
    mut clf: Classifier,
    dataset: &[LabeledSample],
    config: &FinetuneConfig,
    denoiser: &NoiseAndDenoise,
    mut on_epoch: impl FnMut(&Classifier, &EpochStats) -> Result<()>,
) -> Result<(Classifier, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::domain("finetune dataset is empty"));
    }
    if let Some(lora) = &config.lora {
        if clf.adapters.is_empty() {
            clf.attach_lora(lora, config.seed)?;
        }
    }
    let hyper = AdamW::new(config.lr, config.weight_decay);
    let mut state = AdamState::default();
    let root = RngStream::root(config.seed).derive_named("finetune");
    let mut frozen: Vec<Option<SelectionResult>> = vec![None; dataset.len()];
    let mut report = TrainReport {
        format_version: TRAIN_REPORT_VERSION,
        kind: "train_report".into(),
        trainable_params: clf.num_trainable(),
        base_params: clf.spec.num_params(),
        epochs: Vec::with_capacity(config.epochs),
    };
    for epoch in 0..config.epochs {
        let mut epoch_cfg = config.clone();
        epoch_cfg.epsilon = config.epsilon_at(epoch);
        epoch_cfg.eps_schedule = None;
        let epoch_stream = root.derive(epoch as u64);
        let order = shuffled(dataset.len(), &epoch_stream.derive_named("order"));
        let mut stats = EpochStats {
            epoch,
            epsilon: epoch_cfg.epsilon,
            sce: 0.0,
            madv: 0.0,
            total: 0.0,
            mask_ratio: 0.0,
            cold_start_ratio: 0.0,
            nh_histogram: vec![0; config.m + 1],
        };
        let reuse = !config.update_selection && epoch > 0;
        for batch in order.chunks(config.batch_size) {
            let outs = batch
                .par_iter()
                .map(|&i| {
                    let frozen_sel = if reuse { frozen[i].as_ref() } else { None };
                    ftcadis_step_loss_with(
                        &clf,
                        &dataset[i],
                        &epoch_cfg,
                        denoiser,
                        &epoch_stream.derive(i as u64),
                        frozen_sel,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads = Vec::with_capacity(outs.len());
            for (&i, out) in batch.iter().zip(outs) {
                let d = out.diagnostics;
                check_finite(d.total, || format!("finetune epoch {epoch}, sample {i}"))?;
                stats.sce += d.sce;
                stats.madv += d.madv;
                stats.total += d.total;
                stats.mask_ratio += f64::from(u8::from(out.selection.all_correct()));
                stats.cold_start_ratio += f64::from(u8::from(d.cold_start_used));
                stats.nh_histogram[d.nh_count] += 1;
                if !config.update_selection && epoch == 0 {
                    frozen[i] = Some(out.selection);
                }
                grads.push(out.loss.grads);
            }
            let step = sum_in_order(&clf, &grads);
            optimizer_step(&mut clf, &step, &mut state, &hyper)?;
        }
        let n = dataset.len() as f64;
        stats.sce /= n;
        stats.madv /= n;
        stats.total /= n;
        stats.mask_ratio /= n;
        stats.cold_start_ratio /= n;
        on_epoch(&clf, &stats)?;
        report.epochs.push(stats);
    }
    Ok((clf, report))
}

pub fn finetune(
    clf: Classifier,
    dataset: &[LabeledSample],
    config: &FinetuneConfig,
    denoiser: &NoiseAndDenoise,
) -> Result<(Classifier, TrainReport)> {
    finetune_with_hook(clf, dataset, config, denoiser, |_, _| Ok(()))
}
