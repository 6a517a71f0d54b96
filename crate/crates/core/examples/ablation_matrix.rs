//! The ablation matrix driven through the library: every variant over a few
//! seeds from a shared pretrained base, summarized as the ablation table.
//!
//! ```text
//! cargo run --release --example ablation_matrix [config.toml]
//! ```
//!
//! Defaults to `examples/configs/quick.toml`; pass `examples/configs/benchmark.toml`
//! for the full benchmark (several minutes per seed).

use std::path::PathBuf;

use smoothlab::cli::{ablation_csv, generate_data, pretrain_stage, run_variant, ExperimentConfig};

fn main() -> smoothlab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/quick.toml").into()
        });
    let cfg = ExperimentConfig::load(&path, &[])?;
    let (train, test) = generate_data(&cfg)?;
    let (base, summary) = pretrain_stage(&cfg, &train, &test)?;
    println!("base test accuracy {:.3}", summary.test_accuracy);

    let mut rows = Vec::new();
    for &variant in &cfg.ablate.variants {
        let mut reps = Vec::new();
        for &seed in &cfg.ablate.seeds {
            let run = ExperimentConfig {
                seed,
                ..cfg.clone()
            };
            let (_, _, eval) = run_variant(&run, variant, &base, &train, &test)?;
            println!(
                "{:<16} seed {seed}: acr={:.4} clean={:.3}",
                variant.name(),
                eval.acr,
                eval.clean_accuracy
            );
            reps.push(eval);
        }
        rows.push((variant.name().to_string(), reps));
    }
    print!("\n{}", ablation_csv(&rows)?);
    Ok(())
}
