//! Synthetic world: the class-labeled Gaussian mixture, the linear-β noise
//! schedule, and the analytic one-shot denoiser standing in for a diffusion model.

mod denoise;
mod mixture;
mod schedule;

pub use denoise::{hallucination_rate, noise_and_denoise, NoiseAndDenoise, OneShotDenoiser};
pub use mixture::{
    bayes_classify, posterior_mean_denoise, sample_dataset, Dataset, LabeledSample, MixtureSpec,
    Mode, DATASET_VERSION,
};
pub use schedule::{DiffusionSchedule, ScheduleConfig};

/// Two classes with two modes each in `d = 8`: class 0 at `±a·e₁`, class 1 at `±a·e₂`.
///
/// With `a = 1`, `τ = 0.3` the noise-and-denoise hallucination rate at `σ = 0.5`
/// is about 0.20.
pub fn benchmark_world() -> MixtureSpec {
    four_mode_world(8, 1.0, 0.3)
}

pub fn four_mode_world(dim: usize, separation: f64, within_mode_std: f64) -> MixtureSpec {
    let axis = |k: usize, s: f64| {
        let mut v = vec![0.0; dim];
        v[k] = s;
        v
    };
    let modes = vec![
        Mode {
            mean: axis(0, separation),
            class: 0,
            prior: 0.25,
        },
        Mode {
            mean: axis(0, -separation),
            class: 0,
            prior: 0.25,
        },
        Mode {
            mean: axis(1, separation),
            class: 1,
            prior: 0.25,
        },
        Mode {
            mean: axis(1, -separation),
            class: 1,
            prior: 0.25,
        },
    ];
    MixtureSpec {
        dim,
        within_mode_std,
        modes,
    }
}
