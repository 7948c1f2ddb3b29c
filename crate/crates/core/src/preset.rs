//! Experiment presets, stored as TOML files under `presets/`.

use serde::{Deserialize, Serialize};

use crate::config::GeneratorConfig;
use crate::detect::{linspace, DetectorKind};
use crate::error::{Error, Result};
use crate::osr::MlpConfig;

const BUILTIN: [(&str, &str); 2] = [
    ("exp1", include_str!("../../../presets/exp1.toml")),
    ("exp2", include_str!("../../../presets/exp2.toml")),
];

/// Stream hyperparameters swept by a preset. Each listed value replaces the
/// base value in one stream family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Vary {
    pub percentage_novel: Option<Vec<f64>>,
    pub n_clusters_per_class: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSettings {
    pub detectors: Vec<DetectorKind>,
    pub grid_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsrSettings {
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub n_epsilons: usize,
    #[serde(default)]
    pub mlp: MlpConfig,
}

impl OsrSettings {
    pub fn epsilons(&self) -> Vec<f64> {
        linspace(self.epsilon_min, self.epsilon_max, self.n_epsilons)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seeds: Vec<u64>,
    pub stream: GeneratorConfig,
    #[serde(default)]
    pub vary: Vary,
    pub detect: Option<DetectSettings>,
    pub osr: Option<OsrSettings>,
}

/// One stream family of a preset: a label and its config without a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub label: String,
    pub config: GeneratorConfig,
}

impl Family {
    /// The family's config with `random_state` set.
    pub fn seeded(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig { random_state: Some(seed), ..self.config.clone() }
    }
}

impl Preset {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Preset = toml::from_str(text).map_err(|e| Error::Parse(format!("preset: {e}")))?;
        p.stream.validate()?;
        Ok(p)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::Unsupported(format!("unknown preset '{name}'; available: {}", Self::names().join(", "))))?;
        Self::from_toml(text)
    }

    pub fn names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    /// Source text of a built-in preset.
    pub fn source(name: &str) -> Option<&'static str> {
        BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn families(&self) -> Vec<Family> {
        let base = GeneratorConfig { random_state: None, ..self.stream.clone() };
        if let Some(ps) = &self.vary.percentage_novel {
            return ps
                .iter()
                .map(|&p| Family {
                    label: format!("percentage_novel = {p}"),
                    config: GeneratorConfig { percentage_novel: p, ..base.clone() },
                })
                .collect();
        }
        if let Some(ks) = &self.vary.n_clusters_per_class {
            return ks
                .iter()
                .map(|&k| Family {
                    label: format!("n_clusters_per_class = {k}"),
                    config: GeneratorConfig { n_clusters_per_class: k, ..base.clone() },
                })
                .collect();
        }
        vec![Family { label: self.name.clone(), config: base }]
    }
}
