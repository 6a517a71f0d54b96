use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::io::{read_versioned, write_json};
use crate::net::log_sum_exp;
use crate::numerics::{fill_gaussian, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub mean: Vec<f64>,
    pub class: usize,
    pub prior: f64,
}

/// Class-labeled isotropic Gaussian mixture: the data distribution, and the
/// world model used by the analytic denoiser and the Bayes oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub within_mode_std: f64,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("world.dim must be positive"));
        }
        if !(self.within_mode_std > 0.0) || !self.within_mode_std.is_finite() {
            return Err(Error::config("world.within_mode_std must be positive"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("world.modes is empty"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if m.mean.len() != self.dim {
                return Err(Error::config(format!(
                    "world.modes[{i}].mean has length {}, expected {}",
                    m.mean.len(),
                    self.dim
                )));
            }
            if !(m.prior > 0.0) || m.prior > 1.0 {
                return Err(Error::config(format!(
                    "world.modes[{i}].prior must be in (0, 1]"
                )));
            }
        }
        let total: f64 = self.modes.iter().map(|m| m.prior).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "world.modes priors sum to {total}, not 1"
            )));
        }
        let k = self.num_classes();
        if k < 2 {
            return Err(Error::config("world needs at least two classes"));
        }
        for c in 0..k {
            if !self.modes.iter().any(|m| m.class == c) {
                return Err(Error::config(format!("world class {c} owns no mode")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.modes
            .iter()
            .map(|m| m.class)
            .max()
            .map_or(0, |c| c + 1)
    }

    /// Draws one sample from the start of `stream`.
    pub fn sample(&self, stream: &RngStream) -> LabeledSample {
        let mut rng = stream.generator();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = self.modes.len() - 1;
        for (i, m) in self.modes.iter().enumerate() {
            acc += m.prior;
            if u < acc {
                pick = i;
                break;
            }
        }
        let mode = &self.modes[pick];
        let mut x = vec![0.0; self.dim];
        fill_gaussian(&mut rng, &mut x, self.within_mode_std);
        for (xi, mi) in x.iter_mut().zip(&mode.mean) {
            *xi += mi;
        }
        LabeledSample { x, y: mode.class }
    }

    /// Class scores `log Σ_{modes of c} π_m N(x; μ_m, τ²I)` up to a shared constant.
    pub fn class_log_scores(&self, x: &[f64]) -> Vec<f64> {
        let two_var = 2.0 * self.within_mode_std * self.within_mode_std;
        let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); self.num_classes()];
        for m in &self.modes {
            per_class[m.class].push(m.prior.ln() - sq_dist(x, &m.mean) / two_var);
        }
        per_class.iter().map(|v| log_sum_exp(v)).collect()
    }
}

/// `n` samples; sample `i` comes from `stream.derive(i)`.
pub fn sample_dataset(
    spec: &MixtureSpec,
    n: usize,
    stream: &RngStream,
) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::domain("dataset size must be >= 1"));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| spec.sample(&stream.derive(i as u64)))
        .collect())
}

/// Bayes-optimal label under the clean mixture; ties go to the smallest class.
pub fn bayes_classify(world: &MixtureSpec, x: &[f64]) -> usize {
    crate::net::argmax(&world.class_log_scores(x))
}

/// `E[x | x + δ = x_noisy]` with `δ ~ N(0, σ²I)`, in closed form.
pub fn posterior_mean_denoise(
    world: &MixtureSpec,
    x_noisy: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    check_len(world.dim, x_noisy.len())?;
    if !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "denoiser sigma must be positive, got {sigma}"
        )));
    }
    let tau2 = world.within_mode_std * world.within_mode_std;
    let s2 = sigma * sigma;
    let total_var = tau2 + s2;
    let log_w: Vec<f64> = world
        .modes
        .iter()
        .map(|m| m.prior.ln() - sq_dist(x_noisy, &m.mean) / (2.0 * total_var))
        .collect();
    let lse = log_sum_exp(&log_w);
    let mut centroid = vec![0.0; world.dim];
    for (m, lw) in world.modes.iter().zip(&log_w) {
        let w = (lw - lse).exp();
        for (c, mu) in centroid.iter_mut().zip(&m.mean) {
            *c += w * mu;
        }
    }
    Ok(x_noisy
        .iter()
        .zip(&centroid)
        .map(|(&xn, &c)| (tau2 * xn + s2 * c) / total_var)
        .collect())
}

pub const DATASET_VERSION: u32 = 1;

/// Versioned dataset document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub format_version: u32,
    pub kind: String,
    pub world: MixtureSpec,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(world: MixtureSpec, samples: Vec<LabeledSample>) -> Self {
        Self {
            format_version: DATASET_VERSION,
            kind: "dataset".into(),
            world,
            samples,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ds: Dataset = read_versioned(path, "dataset", DATASET_VERSION)?;
        ds.world.validate()?;
        for (i, s) in ds.samples.iter().enumerate() {
            if s.x.len() != ds.world.dim || s.y >= ds.world.num_classes() {
                return Err(Error::config(format!(
                    "dataset sample {i} is inconsistent with world"
                )));
            }
        }
        Ok(ds)
    }

    /// Fraction of samples the Bayes oracle labels correctly.
    pub fn bayes_accuracy(&self) -> f64 {
        let hits = self
            .samples
            .iter()
            .filter(|s| bayes_classify(&self.world, &s.x) == s.y)
            .count();
        hits as f64 / self.samples.len().max(1) as f64
    }
}
