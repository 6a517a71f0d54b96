//! Clean training of the base MLP on the benchmark mixture, then a look at
//! how it fares on noisy and on denoised inputs.
//!
//! ```text
//! cargo run --release --example pretrain_classifier
//! ```

use smoothlab::certify::{DenoisedPipeline, NoisyClassifier, Pipeline};
use smoothlab::ftcadis::{accuracy, pretrain, PretrainConfig};
use smoothlab::net::{Activation, MlpSpec};
use smoothlab::numerics::RngStream;
use smoothlab::world::{benchmark_world, sample_dataset, DiffusionSchedule, NoiseAndDenoise};

fn noisy_accuracy(
    p: &dyn Pipeline,
    data: &[smoothlab::world::LabeledSample],
) -> smoothlab::Result<f64> {
    let mut hits = 0;
    for (i, s) in data.iter().enumerate() {
        hits += (p.predict_noisy(&s.x, &RngStream::root(3).derive(i as u64))? == s.y) as usize;
    }
    Ok(hits as f64 / data.len() as f64)
}

fn main() -> smoothlab::Result<()> {
    let world = benchmark_world();
    let root = RngStream::root(0).derive_named("data");
    let train = sample_dataset(&world, 1000, &root.derive_named("train"))?;
    let test = sample_dataset(&world, 500, &root.derive_named("test"))?;

    let spec = MlpSpec::new(vec![8, 64, 64, 2], Activation::Relu);
    let cfg = PretrainConfig {
        epochs: 20,
        lr: 3e-3,
        weight_decay: 0.0,
        batch_size: 32,
        seed: 0,
    };
    let (clf, report) = pretrain(&train, &spec, &cfg)?;
    for (e, l) in report.epoch_losses.iter().enumerate().step_by(5) {
        println!("epoch {e:>2} loss {l:.4}");
    }
    println!("train accuracy {:.3}", report.train_accuracy);
    println!("test accuracy  {:.3}", accuracy(&clf, &test)?);

    let sigma = 0.5;
    let nd = NoiseAndDenoise::new(world, DiffusionSchedule::linear(1e-4, 0.02, 1000)?, sigma)?;
    println!(
        "accuracy under N(0, {sigma}^2) noise:   {:.3}",
        noisy_accuracy(
            &NoisyClassifier {
                classifier: &clf,
                sigma
            },
            &test
        )?
    );
    println!(
        "accuracy on denoised noisy inputs: {:.3}",
        noisy_accuracy(&DenoisedPipeline::new(&clf, &nd)?, &test)?
    );
    Ok(())
}
