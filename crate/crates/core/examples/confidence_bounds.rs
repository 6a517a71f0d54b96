//! Clopper-Pearson lower bounds and the certified radii they imply.
//!
//! ```text
//! cargo run --example confidence_bounds
//! ```

use smoothlab::certify::outcome_from_counts;
use smoothlab::numerics::{clopper_pearson_lower, std_normal_quantile};

fn main() -> smoothlab::Result<()> {
    let sigma = 0.5;
    let alpha = 0.001;
    println!(
        "{:>6} {:>6} {:>10} {:>10} {:>8}",
        "k", "n", "p_lower", "sigma*z", "radius"
    );
    for n in [100u64, 1_000, 10_000, 100_000] {
        for frac in [0.5, 0.6, 0.9, 1.0] {
            let k = (frac * n as f64).round() as u64;
            let p = clopper_pearson_lower(k, n, alpha)?;
            let z = if p > 0.0 {
                sigma * std_normal_quantile(p)?
            } else {
                f64::NEG_INFINITY
            };
            let out = outcome_from_counts(0, k, n, alpha, sigma)?;
            let radius = if out.abstained() {
                "abstain".to_string()
            } else {
                format!("{:.4}", out.radius)
            };
            println!("{k:>6} {n:>6} {p:>10.6} {z:>10.4} {radius:>8}");
        }
    }
    Ok(())
}
