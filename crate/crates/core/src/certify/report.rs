use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::Pipeline;
use super::procedure::{certify, CertOutcome, CertifyConfig};
use crate::error::{Error, Result};
use crate::io::{csv_string, read_versioned, write_json, write_text};
use crate::numerics::RngStream;
use crate::world::LabeledSample;

pub const EVAL_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub label: usize,
    pub prediction: Option<usize>,
    pub p_lower: f64,
    pub radius: f64,
}

impl SampleOutcome {
    pub fn correct(&self) -> bool {
        self.prediction == Some(self.label)
    }

    /// Radius counted toward ACR: zero unless certified and correct.
    pub fn credited_radius(&self) -> f64 {
        if self.correct() {
            self.radius
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusAccuracy {
    pub radius: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub kind: String,
    pub method: String,
    pub sigma: f64,
    pub n0: u64,
    pub n: u64,
    pub alpha: f64,
    pub acr: f64,
    pub clean_accuracy: f64,
    pub abstain_rate: f64,
    pub certified_accuracy: Vec<RadiusAccuracy>,
    pub outcomes: Vec<SampleOutcome>,
}

/// Fraction of outcomes that are correct, certified, and have radius `> r`.
pub fn certified_accuracy_at(outcomes: &[SampleOutcome], r: f64) -> f64 {
    let hits = outcomes
        .iter()
        .filter(|o| o.correct() && o.radius > r)
        .count();
    hits as f64 / outcomes.len().max(1) as f64
}

pub fn average_certified_radius(outcomes: &[SampleOutcome]) -> f64 {
    outcomes
        .iter()
        .map(SampleOutcome::credited_radius)
        .sum::<f64>()
        / outcomes.len().max(1) as f64
}

impl EvalReport {
    pub fn from_outcomes(
        method: impl Into<String>,
        config: &CertifyConfig,
        outcomes: Vec<SampleOutcome>,
        clean_accuracy: f64,
    ) -> Self {
        let n = outcomes.len().max(1) as f64;
        let mut grid = config.radius_grid.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Self {
            format_version: EVAL_REPORT_VERSION,
            kind: "eval_report".into(),
            method: method.into(),
            sigma: config.sigma,
            n0: config.n0,
            n: config.n,
            alpha: config.alpha,
            acr: average_certified_radius(&outcomes),
            clean_accuracy,
            abstain_rate: outcomes.iter().filter(|o| o.prediction.is_none()).count() as f64 / n,
            certified_accuracy: grid
                .into_iter()
                .map(|radius| RadiusAccuracy {
                    radius,
                    accuracy: certified_accuracy_at(&outcomes, radius),
                })
                .collect(),
            outcomes,
        }
    }

    pub fn samples_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .outcomes
            .iter()
            .map(|o| {
                vec![
                    o.index.to_string(),
                    o.label.to_string(),
                    o.prediction
                        .map_or_else(|| "abstain".to_string(), |p| p.to_string()),
                    o.p_lower.to_string(),
                    o.radius.to_string(),
                ]
            })
            .collect();
        csv_string(
            &["index", "label", "prediction", "p_lower", "radius"],
            &rows,
        )
    }

    pub fn curve_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .certified_accuracy
            .iter()
            .map(|c| vec![c.radius.to_string(), c.accuracy.to_string()])
            .collect();
        csv_string(&["radius", "accuracy"], &rows)
    }

    /// Sibling CSV paths written by [`EvalReport::save`]: `<stem>_samples.csv`, `<stem>_curve.csv`.
    pub fn csv_paths(json_path: &Path) -> (PathBuf, PathBuf) {
        let stem = json_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("eval");
        (
            json_path.with_file_name(format!("{stem}_samples.csv")),
            json_path.with_file_name(format!("{stem}_curve.csv")),
        )
    }

    pub fn save(&self, json_path: &Path) -> Result<()> {
        write_json(json_path, self)?;
        let (samples, curve) = Self::csv_paths(json_path);
        write_text(&samples, &self.samples_csv()?)?;
        write_text(&curve, &self.curve_csv()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_versioned(path, "eval report", EVAL_REPORT_VERSION)
    }
}

/// Certifies every test point; point `i` uses `stream.derive(i)`.
pub fn evaluate<P: Pipeline + ?Sized>(
    pipeline: &P,
    test_set: &[LabeledSample],
    config: &CertifyConfig,
    method: &str,
    stream: &RngStream,
) -> Result<EvalReport> {
    if test_set.is_empty() {
        return Err(Error::domain("test set is empty"));
    }
    config.validate()?;
    let results = test_set
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let c: CertOutcome = certify(pipeline, &s.x, config, &stream.derive(i as u64))?;
            let clean = pipeline.predict_clean(&s.x)?;
            Ok((
                SampleOutcome {
                    index: i,
                    label: s.y,
                    prediction: c.prediction,
                    p_lower: c.p_lower,
                    radius: c.radius,
                },
                clean == s.y,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let clean_hits = results.iter().filter(|(_, ok)| *ok).count();
    let clean_accuracy = clean_hits as f64 / test_set.len() as f64;
    let outcomes = results.into_iter().map(|(o, _)| o).collect();
    Ok(EvalReport::from_outcomes(
        method,
        config,
        outcomes,
        clean_accuracy,
    ))
}
