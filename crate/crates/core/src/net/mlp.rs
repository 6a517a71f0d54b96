use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{argmax, Loss};
use super::matrix::Matrix;
use crate::error::{check_len, Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Layer widths from input to output, plus the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, activation: Activation) -> Self {
        Self {
            layer_dims,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::config(
                "net.layer_dims needs at least input and output dims",
            ));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::config("net.layer_dims entries must be positive"));
        }
        if self.output_dim() < 2 {
            return Err(Error::config("net.layer_dims output dim must be >= 2"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Weights plus biases of the base network.
    pub fn num_params(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Low-rank update `(scale / rank) · B · A` added to a frozen dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    /// `rank × in`
    pub a: Matrix,
    /// `out × rank`
    pub b: Matrix,
    pub rank: usize,
    pub scale: f64,
}

impl LoraAdapter {
    #[inline]
    pub fn multiplier(&self) -> f64 {
        self.scale / self.rank as f64
    }
}

/// Which layers get adapters, and how they are shaped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    #[serde(default = "default_lora_rank")]
    pub rank: usize,
    #[serde(default = "default_lora_scale")]
    pub scale: f64,
    /// Layer indices to adapt; `None` adapts every layer except the head.
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
}

fn default_lora_rank() -> usize {
    4
}

fn default_lora_scale() -> f64 {
    4.0
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self {
            rank: default_lora_rank(),
            scale: default_lora_scale(),
            layers: None,
        }
    }
}

fn uniform_fill(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Feedforward classifier with optional low-rank adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub spec: MlpSpec,
    pub layers: Vec<Dense>,
    #[serde(default)]
    pub adapters: BTreeMap<usize, LoraAdapter>,
    /// When set, only adapters and the head layer are trainable.
    #[serde(default)]
    pub adapter_only: bool,
}

/// Per-layer values retained by [`Classifier::forward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer; the last one is the logits.
    pre: Vec<Vec<f64>>,
    /// `A · input` for adapted layers.
    lora_mid: Vec<Option<Vec<f64>>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().unwrap()
    }

    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrad {
    pub a: Matrix,
    pub b: Matrix,
}

/// Gradients of a scalar loss, shaped like the trainable parts of a classifier.
///
/// Frozen base layers carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<Option<LayerGrad>>,
    pub adapters: BTreeMap<usize, AdapterGrad>,
    pub input_grad: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(clf: &Classifier) -> Self {
        let head = clf.layers.len() - 1;
        let layers = clf
            .layers
            .iter()
            .enumerate()
            .map(|(l, d)| {
                (!clf.adapter_only || l == head).then(|| LayerGrad {
                    weight: Matrix::zeros(d.weight.rows(), d.weight.cols()),
                    bias: vec![0.0; d.bias.len()],
                })
            })
            .collect();
        let adapters = clf
            .adapters
            .iter()
            .map(|(&l, ad)| {
                (
                    l,
                    AdapterGrad {
                        a: Matrix::zeros(ad.a.rows(), ad.a.cols()),
                        b: Matrix::zeros(ad.b.rows(), ad.b.cols()),
                    },
                )
            })
            .collect();
        Self {
            layers,
            adapters,
            input_grad: vec![0.0; clf.spec.input_dim()],
        }
    }

    /// Flattened parameter gradient in [`Classifier::trainable_values`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.layers.iter().flatten() {
            out.extend_from_slice(g.weight.as_slice());
            out.extend_from_slice(&g.bias);
        }
        for g in self.adapters.values() {
            out.extend_from_slice(g.a.as_slice());
            out.extend_from_slice(g.b.as_slice());
        }
        out
    }

    fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let layer_parts = self
            .layers
            .iter_mut()
            .flatten()
            .flat_map(|g| [g.weight.as_mut_slice(), g.bias.as_mut_slice()]);
        let adapter_parts = self
            .adapters
            .values_mut()
            .flat_map(|g| [g.a.as_mut_slice(), g.b.as_mut_slice()]);
        layer_parts
            .chain(adapter_parts)
            .chain(std::iter::once(self.input_grad.as_mut_slice()))
    }

    fn slices(&self) -> impl Iterator<Item = &[f64]> {
        let layer_parts = self
            .layers
            .iter()
            .flatten()
            .flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()]);
        let adapter_parts = self
            .adapters
            .values()
            .flat_map(|g| [g.a.as_slice(), g.b.as_slice()]);
        layer_parts
            .chain(adapter_parts)
            .chain(std::iter::once(self.input_grad.as_slice()))
    }

    /// `self += scale · other` (parameters and input gradient).
    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for (dst, src) in self.slices_mut().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for part in self.slices_mut() {
            for v in part {
                *v *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

impl Classifier {
    /// Fan-in scaled uniform init, `U(-1/√fan_in, 1/√fan_in)` for weights and biases.
    pub fn init(spec: MlpSpec, seed: u64, lora: Option<&LoraConfig>) -> Result<Self> {
        spec.validate()?;
        let root = RngStream::root(seed).derive_named("init");
        let layers = spec
            .layer_dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut rng = root.derive(l as u64).generator();
                let weight = uniform_fill(&mut rng, fan_out * fan_in, bound);
                let bias = uniform_fill(&mut rng, fan_out, bound);
                Dense {
                    weight: Matrix::from_fn(fan_out, fan_in, |i, j| weight[i * fan_in + j]),
                    bias,
                }
            })
            .collect();
        let mut clf = Self {
            spec,
            layers,
            adapters: BTreeMap::new(),
            adapter_only: false,
        };
        if let Some(cfg) = lora {
            clf.attach_lora(cfg, seed)?;
        }
        Ok(clf)
    }

    /// Adds adapters (`A` uniform, `B = 0`) and freezes the base layers except the head.
    pub fn attach_lora(&mut self, cfg: &LoraConfig, seed: u64) -> Result<()> {
        let head = self.layers.len() - 1;
        let targets: Vec<usize> = match &cfg.layers {
            Some(ls) => ls.clone(),
            None => (0..head).collect(),
        };
        if targets.is_empty() {
            return Err(Error::config(
                "lora needs at least one non-head layer to adapt",
            ));
        }
        if cfg.rank == 0 || !(cfg.scale > 0.0) {
            return Err(Error::config("lora.rank must be >= 1 and lora.scale > 0"));
        }
        let root = RngStream::root(seed).derive_named("lora");
        for &l in &targets {
            if l >= head {
                return Err(Error::config(format!(
                    "lora.layers entry {l} is not a non-head layer (head is {head})"
                )));
            }
            let (out_dim, in_dim) = (self.layers[l].weight.rows(), self.layers[l].weight.cols());
            if cfg.rank > out_dim.min(in_dim) {
                return Err(Error::config(format!(
                    "lora.rank {} exceeds min dimension {} of layer {l}",
                    cfg.rank,
                    out_dim.min(in_dim)
                )));
            }
            let bound = 1.0 / (in_dim as f64).sqrt();
            let mut rng = root.derive(l as u64).generator();
            let a = uniform_fill(&mut rng, cfg.rank * in_dim, bound);
            self.adapters.insert(
                l,
                LoraAdapter {
                    a: Matrix::from_fn(cfg.rank, in_dim, |i, j| a[i * in_dim + j]),
                    b: Matrix::zeros(out_dim, cfg.rank),
                    rank: cfg.rank,
                    scale: cfg.scale,
                },
            );
        }
        self.adapter_only = true;
        Ok(())
    }

    /// Checks every matrix against the spec (used after deserializing).
    pub fn validate_shapes(&self) -> Result<()> {
        self.spec.validate()?;
        check_len(self.spec.num_layers(), self.layers.len())?;
        for (l, (d, w)) in self
            .layers
            .iter()
            .zip(self.spec.layer_dims.windows(2))
            .enumerate()
        {
            if d.weight.rows() != w[1] || d.weight.cols() != w[0] || d.bias.len() != w[1] {
                return Err(Error::config(format!(
                    "layer {l} does not match layer_dims"
                )));
            }
        }
        for (&l, ad) in &self.adapters {
            let Some(d) = self.layers.get(l) else {
                return Err(Error::config(format!("adapter on missing layer {l}")));
            };
            let ok = ad.rank >= 1
                && ad.a.rows() == ad.rank
                && ad.a.cols() == d.weight.cols()
                && ad.b.rows() == d.weight.rows()
                && ad.b.cols() == ad.rank;
            if !ok {
                return Err(Error::config(format!(
                    "adapter on layer {l} has inconsistent shape"
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn num_trainable(&self) -> usize {
        let head = self.layers.len() - 1;
        let base: usize = self
            .layers
            .iter()
            .enumerate()
            .filter(|(l, _)| !self.adapter_only || *l == head)
            .map(|(_, d)| d.weight.as_slice().len() + d.bias.len())
            .sum();
        let lora: usize = self
            .adapters
            .values()
            .map(|a| a.a.as_slice().len() + a.b.as_slice().len())
            .sum();
        base + lora
    }

    /// Trainable values, flattened: unfrozen layers (weight then bias), then adapters (A then B).
    pub fn trainable_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_trainable());
        let head = self.layers.len() - 1;
        for (l, d) in self.layers.iter().enumerate() {
            if !self.adapter_only || l == head {
                out.extend_from_slice(d.weight.as_slice());
                out.extend_from_slice(&d.bias);
            }
        }
        for a in self.adapters.values() {
            out.extend_from_slice(a.a.as_slice());
            out.extend_from_slice(a.b.as_slice());
        }
        out
    }

    pub(crate) fn trainable_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let head = self.layers.len() - 1;
        let adapter_only = self.adapter_only;
        let mut parts: Vec<&mut [f64]> = Vec::new();
        for (l, d) in self.layers.iter_mut().enumerate() {
            if !adapter_only || l == head {
                parts.push(d.weight.as_mut_slice());
                parts.push(d.bias.as_mut_slice());
            }
        }
        for a in self.adapters.values_mut() {
            parts.push(a.a.as_mut_slice());
            parts.push(a.b.as_mut_slice());
        }
        parts
    }

    /// Overwrites the trainable values from a flat vector in [`Self::trainable_values`] order.
    pub fn set_trainable_values(&mut self, values: &[f64]) -> Result<()> {
        check_len(self.num_trainable(), values.len())?;
        let mut offset = 0;
        for part in self.trainable_slices_mut() {
            let n = part.len();
            part.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn layer_output(&self, l: usize, input: &[f64], out: &mut [f64]) -> Option<Vec<f64>> {
        let dense = &self.layers[l];
        dense.weight.matvec_into(input, out);
        for (o, b) in out.iter_mut().zip(&dense.bias) {
            *o += b;
        }
        self.adapters.get(&l).map(|ad| {
            let mid = ad.a.matvec(input);
            let mult = ad.multiplier();
            for (i, o) in out.iter_mut().enumerate() {
                *o += mult * super::matrix::dot(ad.b.row(i), &mid);
            }
            mid
        })
    }

    /// Logits only, no trace.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), x.len())?;
        let act = self.spec.activation;
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        for l in 0..self.layers.len() {
            let mut out = vec![0.0; self.layers[l].bias.len()];
            self.layer_output(l, &cur, &mut out);
            if l < last {
                for v in &mut out {
                    *v = act.apply(*v);
                }
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Predicted class (ties toward the smallest index).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Trace> {
        check_len(self.input_dim(), x.len())?;
        let act = self.spec.activation;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut lora_mid = Vec::with_capacity(n);
        inputs.push(x.to_vec());
        for l in 0..n {
            let mut z = vec![0.0; self.layers[l].bias.len()];
            lora_mid.push(self.layer_output(l, &inputs[l], &mut z));
            if l + 1 < n {
                inputs.push(z.iter().map(|&v| act.apply(v)).collect());
            }
            pre.push(z);
        }
        Ok(Trace {
            inputs,
            pre,
            lora_mid,
        })
    }

    fn check_trace(&self, trace: &Trace) -> Result<()> {
        let ok = trace.pre.len() == self.layers.len()
            && trace
                .pre
                .iter()
                .zip(&self.layers)
                .all(|(z, d)| z.len() == d.bias.len())
            && trace
                .lora_mid
                .iter()
                .enumerate()
                .all(|(l, m)| m.is_some() == self.adapters.contains_key(&l));
        if ok {
            Ok(())
        } else {
            Err(Error::Usage(
                "trace was not produced by this classifier".into(),
            ))
        }
    }

    /// Reverse-mode pass seeded with `dL/dlogits`, accumulated into `grads` with weight `scale`.
    pub fn backward_accumulate(
        &self,
        trace: &Trace,
        logit_grad: &[f64],
        scale: f64,
        grads: &mut GradientBundle,
    ) -> Result<()> {
        self.check_trace(trace)?;
        check_len(self.num_classes(), logit_grad.len())?;
        let act = self.spec.activation;
        let mut dz: Vec<f64> = logit_grad.iter().map(|g| g * scale).collect();
        for l in (0..self.layers.len()).rev() {
            let input = &trace.inputs[l];
            let dense = &self.layers[l];
            if let Some(g) = grads.layers[l].as_mut() {
                g.weight.add_outer(&dz, input, 1.0);
                for (b, d) in g.bias.iter_mut().zip(&dz) {
                    *b += d;
                }
            }
            let mut d_input = vec![0.0; input.len()];
            dense.weight.matvec_t_acc(&dz, 1.0, &mut d_input);
            if let (Some(ad), Some(mid)) = (self.adapters.get(&l), trace.lora_mid[l].as_ref()) {
                let mult = ad.multiplier();
                let mut d_mid = vec![0.0; ad.rank];
                ad.b.matvec_t_acc(&dz, mult, &mut d_mid);
                if let Some(g) = grads.adapters.get_mut(&l) {
                    g.b.add_outer(&dz, mid, mult);
                    g.a.add_outer(&d_mid, input, 1.0);
                }
                ad.a.matvec_t_acc(&d_mid, 1.0, &mut d_input);
            }
            if l == 0 {
                for (g, d) in grads.input_grad.iter_mut().zip(&d_input) {
                    *g += d;
                }
            } else {
                dz = d_input
                    .iter()
                    .zip(&trace.pre[l - 1])
                    .map(|(d, &z)| d * act.derivative(z))
                    .collect();
            }
        }
        Ok(())
    }

    /// Gradient with respect to the network input only, for a given `dL/dlogits`.
    pub fn input_gradient(&self, trace: &Trace, logit_grad: &[f64]) -> Result<Vec<f64>> {
        let mut grads = GradientBundle {
            layers: vec![None; self.layers.len()],
            adapters: BTreeMap::new(),
            input_grad: vec![0.0; self.input_dim()],
        };
        self.backward_accumulate(trace, logit_grad, 1.0, &mut grads)?;
        Ok(grads.input_grad)
    }

    /// Loss value and exact gradients for a single traced input.
    pub fn backward(&self, trace: &Trace, loss: &Loss<'_>) -> Result<(f64, GradientBundle)> {
        self.check_trace(trace)?;
        let (value, logit_grad) =
            loss.value_and_logit_grad(trace.logits())
                .map_err(|e| match e {
                    Error::Shape { .. } | Error::Usage(_) => {
                        Error::Usage(format!("loss does not match trace: {e}"))
                    }
                    other => other,
                })?;
        let mut grads = GradientBundle::zeros_like(self);
        self.backward_accumulate(trace, &logit_grad, 1.0, &mut grads)?;
        Ok((value, grads))
    }
}
