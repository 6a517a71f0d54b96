use serde::{Deserialize, Serialize};

use super::mlp::{Classifier, GradientBundle};
use crate::error::{check_len, Error, Result};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay,
        }
    }
}

/// First and second moment estimates over the flattened trainable values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One decoupled-weight-decay Adam step applied to a flat parameter vector.
pub fn adamw_update(params: &mut [f64], grads: &[f64], state: &mut AdamState, hyper: &AdamW) {
    if state.m.len() != params.len() {
        state.m = vec![0.0; params.len()];
        state.v = vec![0.0; params.len()];
        state.step = 0;
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let decay = 1.0 - hyper.lr * hyper.weight_decay;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *p *= decay;
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

/// Applies one AdamW step to every trainable value of `clf`.
pub fn optimizer_step(
    clf: &mut Classifier,
    grads: &GradientBundle,
    state: &mut AdamState,
    hyper: &AdamW,
) -> Result<()> {
    let flat = grads.flatten();
    check_len(clf.num_trainable(), flat.len())?;
    if let Some(i) = flat.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient entry {i} is {} at optimizer step {}",
            flat[i],
            state.step + 1
        )));
    }
    let mut params = clf.trainable_values();
    adamw_update(&mut params, &flat, state, hyper);
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "parameters after optimizer step {}",
            state.step
        )));
    }
    clf.set_trainable_values(&params)
}
