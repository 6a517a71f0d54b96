//! Pretrain, then fine-tune the same base twice: once with plain cross-entropy
//! on denoised copies and once with the selective + masked-adversarial
//! objective. Prints the per-epoch training statistics and both certificates.
//!
//! ```text
//! cargo run --release --example ftcadis_finetune [seed]
//! ```

use smoothlab::certify::{evaluate, CertifyConfig, DenoisedPipeline};
use smoothlab::ftcadis::{finetune, pretrain, FinetuneConfig, PretrainConfig};
use smoothlab::net::{Activation, MlpSpec};
use smoothlab::numerics::RngStream;
use smoothlab::world::{benchmark_world, sample_dataset, DiffusionSchedule, NoiseAndDenoise};

fn main() -> smoothlab::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let sigma = 0.5;
    let world = benchmark_world();
    let root = RngStream::root(seed);
    let train = sample_dataset(&world, 500, &root.derive_named("train"))?;
    let test = sample_dataset(&world, 100, &root.derive_named("test"))?;
    let denoiser =
        NoiseAndDenoise::new(world, DiffusionSchedule::linear(1e-4, 0.02, 1000)?, sigma)?;

    let spec = MlpSpec::new(vec![8, 64, 64, 2], Activation::Relu);
    let pcfg = PretrainConfig {
        epochs: 20,
        lr: 3e-3,
        weight_decay: 0.0,
        batch_size: 32,
        seed,
    };
    let (base, _) = pretrain(&train, &spec, &pcfg)?;

    let ours = FinetuneConfig {
        epochs: 5,
        lr: 2.5e-4,
        weight_decay: 0.04,
        seed,
        ..FinetuneConfig::for_sigma(sigma)
    };
    let ccfg = CertifyConfig::for_sigma(sigma);
    for (name, cfg) in [
        ("ce_baseline", ours.clone().ce_baseline()),
        ("ftcadis", ours),
    ] {
        let (clf, report) = finetune(base.clone(), &train, &cfg, &denoiser)?;
        println!("{name}:");
        for e in &report.epochs {
            println!(
                "  epoch {} eps={:.3} sce={:.4} madv={:.4} mask_ratio={:.3} |nh| histogram {:?}",
                e.epoch, e.epsilon, e.sce, e.madv, e.mask_ratio, e.nh_histogram
            );
        }
        let pipe = DenoisedPipeline::new(&clf, &denoiser)?;
        let eval = evaluate(&pipe, &test, &ccfg, name, &root.derive_named("certify"))?;
        let curve: Vec<String> = eval
            .certified_accuracy
            .iter()
            .map(|c| format!("{}:{:.2}", c.radius, c.accuracy))
            .collect();
        println!(
            "  acr={:.4} clean={:.3} certified [{}]",
            eval.acr,
            eval.clean_accuracy,
            curve.join(" ")
        );
    }
    Ok(())
}
