//! Adapter-only fine-tuning: attach rank-4 adapters with zero `B`, check the
//! forward pass is unchanged, then fine-tune only the adapters and the head.
//!
//! ```text
//! cargo run --release --example lora_finetune
//! ```

use smoothlab::certify::{evaluate, CertifyConfig, DenoisedPipeline};
use smoothlab::ftcadis::{finetune, pretrain, FinetuneConfig, PretrainConfig};
use smoothlab::net::{Activation, LoraConfig, MlpSpec};
use smoothlab::numerics::RngStream;
use smoothlab::world::{benchmark_world, sample_dataset, DiffusionSchedule, NoiseAndDenoise};

fn main() -> smoothlab::Result<()> {
    let sigma = 0.5;
    let world = benchmark_world();
    let root = RngStream::root(0);
    let train = sample_dataset(&world, 500, &root.derive_named("train"))?;
    let test = sample_dataset(&world, 100, &root.derive_named("test"))?;
    let denoiser =
        NoiseAndDenoise::new(world, DiffusionSchedule::linear(1e-4, 0.02, 1000)?, sigma)?;

    let spec = MlpSpec::new(vec![8, 192, 192, 2], Activation::Relu);
    let (base, _) = pretrain(
        &train,
        &spec,
        &PretrainConfig {
            epochs: 20,
            lr: 3e-3,
            weight_decay: 0.0,
            batch_size: 32,
            seed: 0,
        },
    )?;

    let mut adapted = base.clone();
    adapted.attach_lora(&LoraConfig::default(), 0)?;
    let same = test
        .iter()
        .all(|s| base.logits(&s.x).ok() == adapted.logits(&s.x).ok());
    println!("zero-B adapters leave logits unchanged: {same}");
    println!(
        "trainable parameters: {} of {}",
        adapted.num_trainable(),
        base.num_trainable()
    );

    let full = FinetuneConfig {
        epochs: 5,
        lr: 2.5e-4,
        weight_decay: 0.04,
        ..FinetuneConfig::for_sigma(sigma)
    };
    let lora = FinetuneConfig {
        lora: Some(LoraConfig::default()),
        ..full.clone()
    };
    for (name, cfg) in [("full", full), ("lora", lora)] {
        let (clf, _) = finetune(base.clone(), &train, &cfg, &denoiser)?;
        let eval = evaluate(
            &DenoisedPipeline::new(&clf, &denoiser)?,
            &test,
            &CertifyConfig::for_sigma(sigma),
            name,
            &root.derive_named("certify"),
        )?;
        println!(
            "{name:>5}: acr={:.4} clean={:.3}",
            eval.acr, eval.clean_accuracy
        );
    }
    Ok(())
}
