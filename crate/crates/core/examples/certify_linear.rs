//! Monte Carlo certification of a linear base classifier, compared with its
//! closed-form smoothed radius.
//!
//! ```text
//! cargo run --release --example certify_linear
//! ```

use smoothlab::certify::{analytic_linear_certify, certify, CertifyConfig, LinearPipeline};
use smoothlab::numerics::RngStream;

fn main() -> smoothlab::Result<()> {
    let sigma = 0.5;
    let w = vec![1.0, 0.0, 0.0, 0.0];
    let pipe = LinearPipeline::new(w.clone(), 0.0, sigma)?;
    let cfg = CertifyConfig {
        n: 10_000,
        alpha: 0.01,
        ..CertifyConfig::for_sigma(sigma)
    };
    println!(
        "{:>7} {:>8} {:>10} {:>10}",
        "margin", "class", "exact", "certified"
    );
    for (i, margin) in [0.1, 0.25, 0.5, 1.0, 1.5].into_iter().enumerate() {
        let x = vec![margin, 0.3, -0.2, 0.0];
        let exact = analytic_linear_certify(&w, 0.0, &x, sigma)?;
        let out = certify(&pipe, &x, &cfg, &RngStream::root(i as u64))?;
        let got = match out.prediction {
            Some(_) => format!("{:.4}", out.radius),
            None => "abstain".into(),
        };
        println!(
            "{margin:>7} {:>8} {:>10.4} {got:>10}",
            exact.class, exact.radius
        );
    }
    Ok(())
}
