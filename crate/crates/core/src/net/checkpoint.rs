//! Versioned JSON checkpoints.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "kind": "classifier_checkpoint",
//!   "classifier": {
//!     "spec": {"layer_dims": [8, 192, 192, 2], "activation": "relu"},
//!     "layers": [{"weight": [[...], ...], "bias": [...]}, ...],
//!     "adapters": {"0": {"a": [[...]], "b": [[...]], "rank": 4, "scale": 4.0}},
//!     "adapter_only": true
//!   },
//!   "optimizer": {"step": 120, "m": [...], "v": [...]}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::Classifier;
use super::optim::AdamState;
use crate::error::Result;
use crate::io::{read_versioned, write_json};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub classifier: Classifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(classifier: Classifier, optimizer: Option<AdamState>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            kind: "classifier_checkpoint".into(),
            classifier,
            optimizer,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_versioned(path, "classifier checkpoint", CHECKPOINT_VERSION)?;
        ck.classifier.validate_shapes()?;
        Ok(ck)
    }
}
