//! Small feedforward classifier with exact reverse-mode gradients,
//! low-rank adapters and an AdamW optimizer.

mod checkpoint;
mod loss;
mod matrix;
mod mlp;
mod optim;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{argmax, cross_entropy, kl_to_target, log_softmax, log_sum_exp, softmax, Loss};
pub use matrix::{dot, l2_norm, Matrix};
pub use mlp::{
    Activation, AdapterGrad, Classifier, Dense, GradientBundle, LayerGrad, LoraAdapter, LoraConfig,
    MlpSpec, Trace,
};
pub use optim::{adamw_update, optimizer_step, AdamState, AdamW};
