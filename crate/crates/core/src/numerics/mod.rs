//! Special functions, random streams and confidence bounds.
//!
//! Everything here is `f64` and deterministic given its inputs.

mod bounds;
mod rng;
mod special;

pub use bounds::clopper_pearson_lower;
pub use rng::{derive_seed, fill_gaussian, gaussian_sample, label_hash, RngStream, StreamRng};
pub use special::{
    inverse_regularized_incomplete_beta, ln_beta, ln_gamma, norm_cdf, norm_pdf,
    regularized_incomplete_beta, std_normal_cdf, std_normal_quantile,
};
