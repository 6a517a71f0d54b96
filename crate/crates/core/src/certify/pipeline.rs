use crate::error::{check_len, Error, Result};
use crate::net::{dot, Classifier};
use crate::numerics::{fill_gaussian, RngStream};
use crate::world::NoiseAndDenoise;

/// A base classifier composed with Gaussian noise (and possibly a denoiser).
///
/// `predict_noisy` must draw all of its randomness from `stream` so that
/// smoothing is reproducible at any parallelism degree.
pub trait Pipeline: Sync {
    fn num_classes(&self) -> usize;
    fn dim(&self) -> usize;
    /// Std of the Gaussian noise added before the base prediction.
    fn sigma(&self) -> f64;
    fn predict_noisy(&self, x: &[f64], stream: &RngStream) -> Result<usize>;
    /// Prediction on the un-noised input.
    fn predict_clean(&self, x: &[f64]) -> Result<usize>;
}

/// Noise, one-shot denoise, classify.
pub struct DenoisedPipeline<'a> {
    pub classifier: &'a Classifier,
    pub denoiser: &'a NoiseAndDenoise,
}

impl<'a> DenoisedPipeline<'a> {
    pub fn new(classifier: &'a Classifier, denoiser: &'a NoiseAndDenoise) -> Result<Self> {
        check_len(denoiser.dim(), classifier.input_dim())?;
        Ok(Self {
            classifier,
            denoiser,
        })
    }
}

impl Pipeline for DenoisedPipeline<'_> {
    fn num_classes(&self) -> usize {
        self.classifier.num_classes()
    }

    fn dim(&self) -> usize {
        self.denoiser.dim()
    }

    fn sigma(&self) -> f64 {
        self.denoiser.sigma()
    }

    fn predict_noisy(&self, x: &[f64], stream: &RngStream) -> Result<usize> {
        self.classifier.predict(&self.denoiser.apply(x, stream)?)
    }

    fn predict_clean(&self, x: &[f64]) -> Result<usize> {
        self.classifier.predict(x)
    }
}

/// Classifier on `x + δ` with no denoiser.
pub struct NoisyClassifier<'a> {
    pub classifier: &'a Classifier,
    pub sigma: f64,
}

impl Pipeline for NoisyClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.classifier.num_classes()
    }

    fn dim(&self) -> usize {
        self.classifier.input_dim()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn predict_noisy(&self, x: &[f64], stream: &RngStream) -> Result<usize> {
        check_len(self.dim(), x.len())?;
        let mut p = vec![0.0; x.len()];
        fill_gaussian(&mut stream.generator(), &mut p, self.sigma);
        for (pi, xi) in p.iter_mut().zip(x) {
            *pi += xi;
        }
        self.classifier.predict(&p)
    }

    fn predict_clean(&self, x: &[f64]) -> Result<usize> {
        self.classifier.predict(x)
    }
}

/// Two-class rule `1[w·x + b > 0]` under Gaussian noise (identity denoiser).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPipeline {
    pub w: Vec<f64>,
    pub b: f64,
    pub sigma: f64,
}

impl LinearPipeline {
    pub fn new(w: Vec<f64>, b: f64, sigma: f64) -> Result<Self> {
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::domain("linear rule needs a nonzero weight vector"));
        }
        if !(sigma > 0.0) {
            return Err(Error::domain("sigma must be positive"));
        }
        Ok(Self { w, b, sigma })
    }

    fn classify(&self, x: &[f64]) -> usize {
        usize::from(dot(&self.w, x) + self.b > 0.0)
    }
}

impl Pipeline for LinearPipeline {
    fn num_classes(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.w.len()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn predict_noisy(&self, x: &[f64], stream: &RngStream) -> Result<usize> {
        check_len(self.dim(), x.len())?;
        let mut p = vec![0.0; x.len()];
        fill_gaussian(&mut stream.generator(), &mut p, self.sigma);
        for (pi, xi) in p.iter_mut().zip(x) {
            *pi += xi;
        }
        Ok(self.classify(&p))
    }

    fn predict_clean(&self, x: &[f64]) -> Result<usize> {
        check_len(self.dim(), x.len())?;
        Ok(self.classify(x))
    }
}
