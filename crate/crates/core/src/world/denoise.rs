use rayon::prelude::*;

use super::mixture::{bayes_classify, posterior_mean_denoise, LabeledSample, MixtureSpec};
use super::schedule::DiffusionSchedule;
use crate::error::{check_len, Error, Result};
use crate::numerics::{fill_gaussian, RngStream};

/// One-shot denoiser built on the exact mixture posterior mean.
///
/// It consumes a diffusion-scaled input `x_t = √ᾱ_t (x + δ)` together with
/// its timestep, exactly like a one-step diffusion denoiser would.
#[derive(Debug, Clone)]
pub struct OneShotDenoiser {
    pub world: MixtureSpec,
    pub schedule: DiffusionSchedule,
}

impl OneShotDenoiser {
    pub fn new(world: MixtureSpec, schedule: DiffusionSchedule) -> Result<Self> {
        world.validate()?;
        Ok(Self { world, schedule })
    }

    pub fn denoise(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        if t == 0 || t > self.schedule.t_max() {
            return Err(Error::domain(format!(
                "timestep {t} outside 1..={}",
                self.schedule.t_max()
            )));
        }
        let inv_scale = 1.0 / self.schedule.alpha_bar(t).sqrt();
        let x_tilde: Vec<f64> = x_t.iter().map(|v| v * inv_scale).collect();
        posterior_mean_denoise(&self.world, &x_tilde, self.schedule.noise_level(t))
    }
}

/// Noise-then-denoise at a fixed smoothing level, with the timestep looked up once.
#[derive(Debug, Clone)]
pub struct NoiseAndDenoise {
    denoiser: OneShotDenoiser,
    sigma: f64,
    t_star: usize,
    alpha_bar_star: f64,
}

impl NoiseAndDenoise {
    pub fn new(world: MixtureSpec, schedule: DiffusionSchedule, sigma: f64) -> Result<Self> {
        let (t_star, alpha_bar_star) = schedule.get_timestep(sigma)?;
        Ok(Self {
            denoiser: OneShotDenoiser::new(world, schedule)?,
            sigma,
            t_star,
            alpha_bar_star,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn timestep(&self) -> usize {
        self.t_star
    }

    /// Noise std the denoiser actually assumes at `t*`.
    pub fn effective_sigma(&self) -> f64 {
        self.denoiser.schedule.noise_level(self.t_star)
    }

    pub fn world(&self) -> &MixtureSpec {
        &self.denoiser.world
    }

    pub fn dim(&self) -> usize {
        self.denoiser.world.dim
    }

    /// Denoises `x + delta` for a caller-supplied noise vector.
    pub fn apply_with_noise(&self, x: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), delta.len())?;
        let scale = self.alpha_bar_star.sqrt();
        let x_t: Vec<f64> = x.iter().zip(delta).map(|(a, d)| scale * (a + d)).collect();
        self.denoiser.denoise(&x_t, self.t_star)
    }

    /// Samples `δ ~ N(0, σ²I)` from `stream` and denoises `x + δ`.
    pub fn apply(&self, x: &[f64], stream: &RngStream) -> Result<Vec<f64>> {
        let mut delta = vec![0.0; self.dim()];
        fill_gaussian(&mut stream.generator(), &mut delta, self.sigma);
        self.apply_with_noise(x, &delta)
    }
}

/// Single noise-and-denoise draw.
pub fn noise_and_denoise(
    x: &[f64],
    sigma: f64,
    stream: &RngStream,
    world: &MixtureSpec,
    schedule: &DiffusionSchedule,
) -> Result<Vec<f64>> {
    NoiseAndDenoise::new(world.clone(), schedule.clone(), sigma)?.apply(x, stream)
}

/// Fraction of noise-and-denoise outputs whose Bayes label differs from the
/// sample's own label. Draw `j` of sample `i` uses `stream.derive(i).derive(j)`.
pub fn hallucination_rate(
    world: &MixtureSpec,
    dataset: &[LabeledSample],
    sigma: f64,
    n_noise: usize,
    stream: &RngStream,
    schedule: &DiffusionSchedule,
) -> Result<f64> {
    if n_noise == 0 {
        return Err(Error::domain("n_noise must be >= 1"));
    }
    if dataset.is_empty() {
        return Err(Error::domain("dataset is empty"));
    }
    let nd = NoiseAndDenoise::new(world.clone(), schedule.clone(), sigma)?;
    let flips = dataset
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<usize> {
            let si = stream.derive(i as u64);
            let mut n = 0;
            for j in 0..n_noise {
                let d = nd.apply(&s.x, &si.derive(j as u64))?;
                if bayes_classify(world, &d) != s.y {
                    n += 1;
                }
            }
            Ok(n)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(flips as f64 / (dataset.len() * n_noise) as f64)
}
