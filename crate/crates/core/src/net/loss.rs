//! Softmax and the two losses the trainers differentiate.

use crate::error::{Error, Result};

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let s: f64 = out.iter().sum();
    for p in &mut out {
        *p /= s;
    }
    out
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `-log softmax(logits)[class]`
pub fn cross_entropy(logits: &[f64], class: usize) -> Result<f64> {
    if class >= logits.len() {
        return Err(Error::Usage(format!(
            "class {class} out of range for {} logits",
            logits.len()
        )));
    }
    Ok(log_sum_exp(logits) - logits[class])
}

pub(crate) fn validate_target(target: &[f64], k: usize) -> Result<()> {
    if target.len() != k {
        return Err(Error::Shape {
            expected: k,
            got: target.len(),
        });
    }
    if target.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("target has negative or non-finite entries"));
    }
    let s: f64 = target.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("target sums to {s}, not 1")));
    }
    Ok(())
}

/// `KL(target ‖ softmax(logits))` in log space; `0 · log 0` counts as zero.
pub fn kl_to_target(logits: &[f64], target: &[f64]) -> Result<f64> {
    validate_target(target, logits.len())?;
    let log_p = log_softmax(logits);
    let kl = target
        .iter()
        .zip(&log_p)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &lp)| t * (t.ln() - lp))
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Scalar loss on a logit vector.
#[derive(Debug, Clone, Copy)]
pub enum Loss<'a> {
    CrossEntropy { class: usize },
    KlToTarget { target: &'a [f64] },
}

impl Loss<'_> {
    /// Loss value and its gradient with respect to the logits.
    ///
    /// Both kinds share the gradient `softmax(logits) - target`.
    pub fn value_and_logit_grad(&self, logits: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = softmax(logits);
        match *self {
            Loss::CrossEntropy { class } => {
                let v = cross_entropy(logits, class)?;
                grad[class] -= 1.0;
                Ok((v, grad))
            }
            Loss::KlToTarget { target } => {
                let v = kl_to_target(logits, target)?;
                for (g, t) in grad.iter_mut().zip(target) {
                    *g -= t;
                }
                Ok((v, grad))
            }
        }
    }
}
