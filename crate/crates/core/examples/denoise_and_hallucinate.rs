//! Timestep lookup for a smoothing level, the one-shot posterior-mean denoiser,
//! and the rate at which denoising flips a sample's Bayes label.
//!
//! ```text
//! cargo run --release --example denoise_and_hallucinate
//! ```

use smoothlab::numerics::RngStream;
use smoothlab::world::{
    bayes_classify, benchmark_world, hallucination_rate, sample_dataset, DiffusionSchedule,
    NoiseAndDenoise,
};

fn main() -> smoothlab::Result<()> {
    let world = benchmark_world();
    let schedule = DiffusionSchedule::linear(1e-4, 0.02, 1000)?;
    let clean = sample_dataset(&world, 20_000, &RngStream::root(0).derive_named("clean"))?;

    println!(
        "{:>6} {:>5} {:>10} {:>14}",
        "sigma", "t*", "sigma_eff", "hallucination"
    );
    for sigma in [0.25, 0.5, 1.0] {
        let (t, _) = schedule.get_timestep(sigma)?;
        let nd = NoiseAndDenoise::new(world.clone(), schedule.clone(), sigma)?;
        let rate = hallucination_rate(
            &world,
            &clean,
            sigma,
            5,
            &RngStream::root(0).derive_named("noise"),
            &schedule,
        )?;
        println!(
            "{sigma:>6} {t:>5} {:>10.5} {rate:>14.4}",
            nd.effective_sigma()
        );
    }

    let nd = NoiseAndDenoise::new(world.clone(), schedule, 0.5)?;
    let s = &clean[0];
    println!("\nclean x = {:.3?} (class {})", &s.x[..2], s.y);
    for j in 0..4 {
        let d = nd.apply(&s.x, &RngStream::root(1).derive(j))?;
        println!(
            "denoised {j}: {:.3?} -> Bayes class {}",
            &d[..2],
            bayes_classify(&world, &d)
        );
    }
    Ok(())
}
