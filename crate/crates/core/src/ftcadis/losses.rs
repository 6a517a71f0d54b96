//! Selection of non-hallucinated copies and the losses built on it.

use crate::error::{check_len, Error, Result};
use crate::net::{argmax, l2_norm, softmax, Classifier, GradientBundle, Loss};

use super::config::AdvVariant;

/// Which denoised copies of one clean sample the classifier gets right.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub denoised: Vec<Vec<f64>>,
    /// Cross-entropy of every copy under the selecting parameters.
    pub ce_losses: Vec<f64>,
    /// Zero-based copy indices (ascending). After a cold start this holds
    /// only the minimum-CE copy.
    pub nh_indices: Vec<usize>,
    pub cold_start_used: bool,
}

impl SelectionResult {
    pub fn m(&self) -> usize {
        self.denoised.len()
    }

    /// Copies that classify to `y`, ignoring any cold-start fallback.
    pub fn correct_count(&self) -> usize {
        if self.cold_start_used {
            0
        } else {
            self.nh_indices.len()
        }
    }

    /// Every copy is classified correctly (`|D_nh| = M`).
    pub fn all_correct(&self) -> bool {
        !self.cold_start_used && self.nh_indices.len() == self.m()
    }
}

fn check_copies(clf: &Classifier, copies: &[Vec<f64>]) -> Result<()> {
    if copies.is_empty() {
        return Err(Error::domain("need at least one denoised copy"));
    }
    for c in copies {
        check_len(clf.input_dim(), c.len())?;
    }
    Ok(())
}

/// Marks copies whose predicted class equals `y`. With `cold_start`, an empty
/// selection falls back to the single copy of lowest cross-entropy.
pub fn select_non_hallucinated(
    clf: &Classifier,
    denoised: Vec<Vec<f64>>,
    y: usize,
    cold_start: bool,
) -> Result<SelectionResult> {
    check_copies(clf, &denoised)?;
    let mut ce_losses = Vec::with_capacity(denoised.len());
    let mut nh_indices = Vec::new();
    for (i, d) in denoised.iter().enumerate() {
        let logits = clf.logits(d)?;
        ce_losses.push(crate::net::cross_entropy(&logits, y)?);
        if argmax(&logits) == y {
            nh_indices.push(i);
        }
    }
    let mut cold_start_used = false;
    if nh_indices.is_empty() && cold_start {
        nh_indices.push(argmin(&ce_losses));
        cold_start_used = true;
    }
    Ok(SelectionResult {
        denoised,
        ce_losses,
        nh_indices,
        cold_start_used,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// A scalar loss together with its gradients.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grads: GradientBundle,
}

/// `(weight, input, loss)` terms summed into one output; the input gradient
/// accumulates over all terms.
fn weighted_sum(clf: &Classifier, terms: &[(f64, &[f64], Loss<'_>)]) -> Result<LossOutput> {
    let mut grads = GradientBundle::zeros_like(clf);
    let mut value = 0.0;
    for (w, x, loss) in terms {
        let trace = clf.forward(x)?;
        let (v, g) = loss.value_and_logit_grad(trace.logits())?;
        value += w * v;
        clf.backward_accumulate(&trace, &g, *w, &mut grads)?;
    }
    Ok(LossOutput { value, grads })
}

/// Selective cross-entropy output; `empty` is set when nothing was selected.
#[derive(Debug, Clone)]
pub struct SceOutput {
    pub loss: LossOutput,
    pub empty: bool,
}

/// `(1/M) Σ_{i ∈ nh} CE(clf(denoised_i), y)` evaluated with the current parameters.
///
/// The divisor is always `M`, not the selection size.
pub fn sce_loss(clf: &Classifier, selection: &SelectionResult, y: usize) -> Result<SceOutput> {
    check_copies(clf, &selection.denoised)?;
    let m = selection.m() as f64;
    let terms: Vec<(f64, &[f64], Loss<'_>)> = selection
        .nh_indices
        .iter()
        .map(|&i| {
            (
                1.0 / m,
                selection.denoised[i].as_slice(),
                Loss::CrossEntropy { class: y },
            )
        })
        .collect();
    Ok(SceOutput {
        loss: weighted_sum(clf, &terms)?,
        empty: selection.nh_indices.is_empty(),
    })
}

/// `(1/M) Σ_i CE(clf(denoised_i), y)` over every copy.
pub fn ce_baseline_loss(clf: &Classifier, denoised: &[Vec<f64>], y: usize) -> Result<LossOutput> {
    check_copies(clf, denoised)?;
    let m = denoised.len() as f64;
    let terms: Vec<(f64, &[f64], Loss<'_>)> = denoised
        .iter()
        .map(|d| (1.0 / m, d.as_slice(), Loss::CrossEntropy { class: y }))
        .collect();
    weighted_sum(clf, &terms)
}

/// Average softmax over the denoised copies.
pub fn consistency_target(clf: &Classifier, denoised: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_copies(clf, denoised)?;
    let mut avg = vec![0.0; clf.num_classes()];
    for d in denoised {
        let logits = clf.logits(d)?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "classifier logits on a denoised copy".into(),
            ));
        }
        for (a, p) in avg.iter_mut().zip(softmax(&logits)) {
            *a += p;
        }
    }
    let m = denoised.len() as f64;
    for a in &mut avg {
        *a /= m;
    }
    Ok(avg)
}

pub fn one_hot(k: usize, y: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[y] = 1.0;
    v
}

/// L2 projected gradient ascent on `KL(target ‖ softmax(clf(x + η)))`.
///
/// Each of the `t_steps` steps moves `2ε/T` along the normalized input
/// gradient, then projects back onto `‖η − eta_init‖₂ ≤ ε`. A zero gradient
/// leaves `η` where it is.
pub fn pgd_attack(
    clf: &Classifier,
    x: &[f64],
    eta_init: &[f64],
    target: &[f64],
    epsilon: f64,
    t_steps: usize,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || t_steps == 0 {
        return Err(Error::domain("pgd needs epsilon > 0 and t_steps >= 1"));
    }
    check_len(clf.input_dim(), x.len())?;
    check_len(clf.input_dim(), eta_init.len())?;
    let step = 2.0 * epsilon / t_steps as f64;
    let loss = Loss::KlToTarget { target };
    let mut eta = eta_init.to_vec();
    let mut point = vec![0.0; x.len()];
    for _ in 0..t_steps {
        for ((p, a), e) in point.iter_mut().zip(x).zip(&eta) {
            *p = a + e;
        }
        let trace = clf.forward(&point)?;
        let (_, logit_grad) = loss.value_and_logit_grad(trace.logits())?;
        let g = clf.input_gradient(&trace, &logit_grad)?;
        let norm = l2_norm(&g);
        if norm > 0.0 && norm.is_finite() {
            for (e, gi) in eta.iter_mut().zip(&g) {
                *e += step * gi / norm;
            }
        }
        let mut offset: Vec<f64> = eta.iter().zip(eta_init).map(|(e, e0)| e - e0).collect();
        let dist = l2_norm(&offset);
        if dist > epsilon {
            let shrink = epsilon / dist;
            for o in &mut offset {
                *o *= shrink;
            }
            for ((e, e0), o) in eta.iter_mut().zip(eta_init).zip(&offset) {
                *e = e0 + o;
            }
        }
    }
    Ok(eta)
}

/// Adversarial KL term with fixed perturbations and target.
///
/// Returns `max_i` (or the mean, for averaging variants) of
/// `KL(target ‖ softmax(clf(x + η_i)))`, plus the per-copy values. The
/// input gradient is with respect to `x`.
pub fn adversarial_surrogate(
    clf: &Classifier,
    x: &[f64],
    etas: &[Vec<f64>],
    target: &[f64],
    use_max: bool,
) -> Result<(LossOutput, Vec<f64>)> {
    if etas.is_empty() {
        return Err(Error::domain("need at least one perturbation"));
    }
    let points: Vec<Vec<f64>> = etas
        .iter()
        .map(|e| x.iter().zip(e).map(|(a, b)| a + b).collect())
        .collect();
    let per_copy: Vec<f64> = points
        .iter()
        .map(|p| crate::net::kl_to_target(&clf.logits(p)?, target))
        .collect::<Result<_>>()?;
    let loss = Loss::KlToTarget { target };
    let out = if use_max {
        let best = argmax(&per_copy);
        weighted_sum(clf, &[(1.0, points[best].as_slice(), loss)])?
    } else {
        let w = 1.0 / points.len() as f64;
        let terms: Vec<_> = points.iter().map(|p| (w, p.as_slice(), loss)).collect();
        weighted_sum(clf, &terms)?
    };
    Ok((out, per_copy))
}

/// Masked adversarial loss output.
#[derive(Debug, Clone)]
pub struct MadvOutput {
    pub loss: LossOutput,
    /// The all-copies-correct condition held (or masking was disabled).
    pub active: bool,
    pub per_copy_kl: Vec<f64>,
    pub eta_stars: Vec<Vec<f64>>,
}

/// Settings the masked adversarial term reads from the fine-tuning config.
#[derive(Debug, Clone, Copy)]
pub struct AdvSettings {
    pub variant: AdvVariant,
    pub epsilon: f64,
    pub t_steps: usize,
    pub mask: bool,
}

/// `1[|D_nh| = M] · max_i max_{‖η*−η_i‖≤ε} KL(ŷ ‖ clf(x + η*))` with
/// `η_i = denoised_i − x` and `ŷ` the consistency target (held constant).
pub fn madv_loss(
    clf: &Classifier,
    x: &[f64],
    y: usize,
    selection: &SelectionResult,
    settings: &AdvSettings,
) -> Result<MadvOutput> {
    check_len(clf.input_dim(), x.len())?;
    check_copies(clf, &selection.denoised)?;
    let active =
        settings.variant != AdvVariant::None && (!settings.mask || selection.all_correct());
    if !active {
        return Ok(MadvOutput {
            loss: LossOutput {
                value: 0.0,
                grads: GradientBundle::zeros_like(clf),
            },
            active: false,
            per_copy_kl: Vec::new(),
            eta_stars: Vec::new(),
        });
    }
    let target = if settings.variant.uses_soft_target() {
        consistency_target(clf, &selection.denoised)?
    } else {
        one_hot(clf.num_classes(), y)
    };
    let eta_stars: Vec<Vec<f64>> = selection
        .denoised
        .iter()
        .map(|d| {
            let eta0: Vec<f64> = d.iter().zip(x).map(|(a, b)| a - b).collect();
            pgd_attack(clf, x, &eta0, &target, settings.epsilon, settings.t_steps)
        })
        .collect::<Result<_>>()?;
    let (loss, per_copy_kl) =
        adversarial_surrogate(clf, x, &eta_stars, &target, settings.variant.uses_max())?;
    Ok(MadvOutput {
        loss,
        active: true,
        per_copy_kl,
        eta_stars,
    })
}
