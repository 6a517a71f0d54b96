use super::special::inverse_regularized_incomplete_beta;
use crate::error::{Error, Result};

/// One-sided `1 - alpha` Clopper–Pearson lower bound on a binomial proportion
/// after `k` successes in `n` trials.
///
/// Uses the beta-quantile identity `p_lower = B⁻¹(alpha; k, n - k + 1)`.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::domain(format!(
            "need 0 <= k <= n and n >= 1, got k={k}, n={n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("need 0 < alpha < 1, got {alpha}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let p = inverse_regularized_incomplete_beta(k as f64, (n - k + 1) as f64, alpha)?;
    Ok(p.min(k as f64 / n as f64))
}
