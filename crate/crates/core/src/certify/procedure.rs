use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::Pipeline;
use crate::error::{check_len, Error, Result};
use crate::net::{dot, l2_norm};
use crate::numerics::{clopper_pearson_lower, norm_cdf, std_normal_quantile, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_n0")]
    pub n0: u64,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub sigma: f64,
    #[serde(default = "default_grid")]
    pub radius_grid: Vec<f64>,
}

fn default_n0() -> u64 {
    100
}

fn default_n() -> u64 {
    1000
}

fn default_alpha() -> f64 {
    0.001
}

fn default_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

impl CertifyConfig {
    /// `n0 = 100`, `n = 1000`, `α = 0.001`.
    pub fn for_sigma(sigma: f64) -> Self {
        Self {
            n0: default_n0(),
            n: default_n(),
            alpha: default_alpha(),
            sigma,
            radius_grid: default_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n == 0 {
            return Err(Error::config("certify.n0 and certify.n must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("certify.alpha must lie in (0, 1)"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::config("certify.sigma must be positive"));
        }
        if self.radius_grid.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("certify.radius_grid entries must be >= 0"));
        }
        Ok(())
    }
}

/// Result of one certification. `prediction` is `None` on abstain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertOutcome {
    pub prediction: Option<usize>,
    pub p_lower: f64,
    pub radius: f64,
}

impl CertOutcome {
    pub fn abstained(&self) -> bool {
        self.prediction.is_none()
    }
}

/// Class histogram of `count` noisy predictions; draw `j` uses `stream.derive(j)`.
pub fn smoothed_counts<P: Pipeline + ?Sized>(
    pipeline: &P,
    x: &[f64],
    count: u64,
    stream: &RngStream,
) -> Result<Vec<u64>> {
    check_len(pipeline.dim(), x.len())?;
    let k = pipeline.num_classes();
    (0..count)
        .into_par_iter()
        .try_fold(
            || vec![0u64; k],
            |mut acc, j| {
                let c = pipeline.predict_noisy(x, &stream.derive(j))?;
                acc[c] += 1;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; k],
            |mut a, b| {
                for (ai, bi) in a.iter_mut().zip(&b) {
                    *ai += bi;
                }
                Ok(a)
            },
        )
}

fn top_class(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Certify iff `p̲ > 1/2` (strictly), with radius `σ·Φ⁻¹(p̲)`.
pub fn outcome_from_lower_bound(class: usize, p_lower: f64, sigma: f64) -> Result<CertOutcome> {
    if p_lower > 0.5 {
        Ok(CertOutcome {
            prediction: Some(class),
            p_lower,
            radius: sigma * std_normal_quantile(p_lower)?,
        })
    } else {
        Ok(CertOutcome {
            prediction: None,
            p_lower,
            radius: 0.0,
        })
    }
}

/// Outcome for `k` hits of `class` among `n` estimation draws.
pub fn outcome_from_counts(
    class: usize,
    k: u64,
    n: u64,
    alpha: f64,
    sigma: f64,
) -> Result<CertOutcome> {
    outcome_from_lower_bound(class, clopper_pearson_lower(k, n, alpha)?, sigma)
}

/// Selects the top class from `n0` draws, then lower-bounds its probability
/// from `n` independent draws. The two phases use disjoint streams.
pub fn certify<P: Pipeline + ?Sized>(
    pipeline: &P,
    x: &[f64],
    config: &CertifyConfig,
    stream: &RngStream,
) -> Result<CertOutcome> {
    config.validate()?;
    if pipeline.sigma() != config.sigma {
        return Err(Error::config(format!(
            "pipeline sigma {} differs from certify.sigma {}",
            pipeline.sigma(),
            config.sigma
        )));
    }
    let selection = smoothed_counts(pipeline, x, config.n0, &stream.derive_named("select"))?;
    let class = top_class(&selection);
    let estimate = smoothed_counts(pipeline, x, config.n, &stream.derive_named("estimate"))?;
    outcome_from_counts(class, estimate[class], config.n, config.alpha, config.sigma)
}

/// Exact smoothing result for the two-class linear rule `1[w·x + b > 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCertificate {
    pub class: usize,
    /// Probability that the noisy prediction equals `class`.
    pub p: f64,
    /// Distance to the decision boundary, which is also `σ·Φ⁻¹(p)`.
    pub radius: f64,
}

pub fn analytic_linear_certify(
    w: &[f64],
    b: f64,
    x: &[f64],
    sigma: f64,
) -> Result<LinearCertificate> {
    check_len(w.len(), x.len())?;
    let norm = l2_norm(w);
    if !(norm > 0.0) {
        return Err(Error::domain("linear rule needs a nonzero weight vector"));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma must be positive"));
    }
    let score = dot(w, x) + b;
    let class = usize::from(score > 0.0);
    let margin = score.abs() / norm;
    Ok(LinearCertificate {
        class,
        p: norm_cdf(margin / sigma),
        radius: margin,
    })
}

/// Largest ℓ∞ radius whose ball fits inside an ℓ2 ball of radius `r2` in `dim` dimensions.
pub fn linf_radius(r2: f64, dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    if !(r2 >= 0.0) {
        return Err(Error::domain("radius must be >= 0"));
    }
    Ok(r2 / (dim as f64).sqrt())
}
