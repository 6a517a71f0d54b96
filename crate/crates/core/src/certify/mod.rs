//! Monte-Carlo certification of smoothed pipelines and the metrics built on it.

mod pipeline;
mod procedure;
mod report;

pub use pipeline::{DenoisedPipeline, LinearPipeline, NoisyClassifier, Pipeline};
pub use procedure::{
    analytic_linear_certify, certify, linf_radius, outcome_from_counts, outcome_from_lower_bound,
    smoothed_counts, CertOutcome, CertifyConfig, LinearCertificate,
};
pub use report::{
    average_certified_radius, certified_accuracy_at, evaluate, EvalReport, RadiusAccuracy,
    SampleOutcome, EVAL_REPORT_VERSION,
};
