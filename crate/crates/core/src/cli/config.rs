use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::CertifyConfig;
use crate::error::{Error, Result};
use crate::ftcadis::{FinetuneConfig, PretrainConfig};
use crate::net::MlpSpec;
use crate::world::{four_mode_world, MixtureSpec, ScheduleConfig};

use super::variant::Variant;

pub const CONFIG_VERSION: u32 = 1;

/// Data distribution: either the two-axis four-mode family or an explicit mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldConfig {
    FourMode {
        dim: usize,
        separation: f64,
        within_mode_std: f64,
    },
    Mixture(MixtureSpec),
}

impl WorldConfig {
    pub fn build(&self) -> Result<MixtureSpec> {
        let spec = match self {
            WorldConfig::FourMode {
                dim,
                separation,
                within_mode_std,
            } => {
                if *dim < 2 {
                    return Err(Error::config(
                        "world.dim must be >= 2 for the four-mode world",
                    ));
                }
                four_mode_world(*dim, *separation, *within_mode_std)
            }
            WorldConfig::Mixture(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "Variant::all")]
    pub variants: Vec<Variant>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            variants: Variant::all(),
        }
    }
}

/// One file driving the whole pipeline.
///
/// The `seed` fields inside `pretrain` and `finetune` are ignored: each phase
/// draws its seed from the top-level `seed` under its own label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub world: WorldConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub data: DataConfig,
    pub net: MlpSpec,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub certify: CertifyConfig,
    #[serde(default)]
    pub ablate: AblateConfig,
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back to a string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies a dotted `section.key=value` override to a parsed document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("override key `{key}` is malformed")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(
        parts[parts.len() - 1].to_string(),
        parse_override_value(raw.trim()),
    );
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Missing(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_VERSION {
            return Err(Error::Version {
                what: "experiment config".into(),
                found: self.format_version,
                expected: CONFIG_VERSION,
            });
        }
        let world = self.world.build()?;
        self.net.validate()?;
        if self.net.input_dim() != world.dim {
            return Err(Error::config(format!(
                "net.layer_dims starts with {} but world.dim is {}",
                self.net.input_dim(),
                world.dim
            )));
        }
        if self.net.output_dim() != world.num_classes() {
            return Err(Error::config(format!(
                "net.layer_dims ends with {} but the world has {} classes",
                self.net.output_dim(),
                world.num_classes()
            )));
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::config("data.n_train and data.n_test must be >= 1"));
        }
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.certify.validate()?;
        if self.certify.sigma != self.finetune.sigma {
            return Err(Error::config(format!(
                "certify.sigma ({}) must equal finetune.sigma ({})",
                self.certify.sigma, self.finetune.sigma
            )));
        }
        if self.ablate.seeds.is_empty() || self.ablate.variants.is_empty() {
            return Err(Error::config(
                "ablate.seeds and ablate.variants must be non-empty",
            ));
        }
        Ok(())
    }

    /// The benchmark: four-mode world in `d = 8`, `σ = 0.5`, FT-CADIS defaults.
    pub fn benchmark(output_dir: impl Into<PathBuf>) -> Self {
        let mut finetune = FinetuneConfig::for_sigma(0.5);
        finetune.epochs = 10;
        finetune.lr = 2.5e-4;
        finetune.weight_decay = 0.04;
        Self {
            format_version: CONFIG_VERSION,
            seed: 0,
            output_dir: output_dir.into(),
            world: WorldConfig::FourMode {
                dim: 8,
                separation: 1.0,
                within_mode_std: 0.3,
            },
            schedule: ScheduleConfig::default(),
            data: DataConfig {
                n_train: 1000,
                n_test: 200,
            },
            net: MlpSpec::new(vec![8, 192, 192, 2], crate::net::Activation::Relu),
            pretrain: PretrainConfig {
                epochs: 30,
                lr: 3e-3,
                weight_decay: 0.0,
                batch_size: 32,
                seed: 0,
            },
            finetune,
            certify: CertifyConfig::for_sigma(0.5),
            ablate: AblateConfig::default(),
        }
    }
}
