//! Generator hyperparameters and their validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// One violated configuration invariant.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("n_chunks must be positive")]
    NoChunks,
    #[error("chunk_size must be positive")]
    EmptyChunks,
    #[error("n_drifts ({n_drifts}) must be smaller than n_chunks ({n_chunks})")]
    TooManyDrifts { n_drifts: usize, n_chunks: usize },
    #[error("n_novel ({n_novel}) must be smaller than n_chunks ({n_chunks})")]
    TooManyNovel { n_novel: usize, n_chunks: usize },
    #[error("percentage_novel ({0}) must lie in [0, 1)")]
    PercentageNovelOutOfRange(f64),
    #[error("n_classes ({0}) must be at least 2")]
    TooFewClasses(usize),
    #[error("weights has {got} entries but n_classes is {expected}")]
    WeightsLength { expected: usize, got: usize },
    #[error("weight {index} ({value}) is not positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights do not sum to 1 (sum = {0})")]
    WeightsSum(f64),
    #[error("n_clusters_per_class must be at least 1")]
    NoClusters,
    #[error("class_sep ({0}) must be positive")]
    NonPositiveClassSep(f64),
    #[error("n_features must be at least 1")]
    NoFeatures,
    #[error("n_informative must be at least 1")]
    NoInformative,
    #[error("informative exceeds features ({n_informative} > {n_features})")]
    InformativeExceedsFeatures { n_informative: usize, n_features: usize },
}

/// Every hyperparameter of the stream generator.
///
/// Field names double as the keys of configuration files. `weights` may be
/// omitted, in which case known classes are balanced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_chunks: usize,
    pub chunk_size: usize,
    pub n_drifts: usize,
    pub n_novel: usize,
    pub percentage_novel: f64,
    pub even_gt: bool,
    pub hide_label: bool,
    pub n_classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub n_clusters_per_class: usize,
    pub class_sep: f64,
    pub n_features: usize,
    pub n_informative: usize,
    pub allow_projection: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_state: Option<u64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_chunks: 200,
            chunk_size: 200,
            n_drifts: 0,
            n_novel: 0,
            percentage_novel: 0.1,
            even_gt: true,
            hide_label: false,
            n_classes: 2,
            weights: None,
            n_clusters_per_class: 1,
            class_sep: 1.0,
            n_features: 10,
            n_informative: 10,
            allow_projection: true,
            random_state: None,
        }
    }
}

impl GeneratorConfig {
    /// Known-class proportions, balanced when not given explicitly.
    pub fn class_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.n_classes as f64; self.n_classes],
        }
    }

    /// Total label count: known classes followed by every unknown class.
    pub fn n_labels(&self) -> usize {
        self.n_classes + self.n_novel
    }

    /// Number of unknown-class rows written into a chunk per active unknown class.
    pub fn novel_rows(&self) -> usize {
        round_half_away(self.percentage_novel * self.chunk_size as f64)
    }

    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        if self.n_chunks == 0 {
            errs.push(ConfigError::NoChunks);
        }
        if self.chunk_size == 0 {
            errs.push(ConfigError::EmptyChunks);
        }
        if self.n_drifts >= self.n_chunks {
            errs.push(ConfigError::TooManyDrifts { n_drifts: self.n_drifts, n_chunks: self.n_chunks });
        }
        if self.n_novel >= self.n_chunks {
            errs.push(ConfigError::TooManyNovel { n_novel: self.n_novel, n_chunks: self.n_chunks });
        }
        if !(0.0..1.0).contains(&self.percentage_novel) {
            errs.push(ConfigError::PercentageNovelOutOfRange(self.percentage_novel));
        }
        if self.n_classes < 2 {
            errs.push(ConfigError::TooFewClasses(self.n_classes));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_classes {
                errs.push(ConfigError::WeightsLength { expected: self.n_classes, got: w.len() });
            }
            for (index, &value) in w.iter().enumerate() {
                if value.is_nan() || value <= 0.0 {
                    errs.push(ConfigError::NonPositiveWeight { index, value });
                }
            }
            let sum: f64 = w.iter().sum();
            if sum.is_nan() || (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                errs.push(ConfigError::WeightsSum(sum));
            }
        }
        if self.n_clusters_per_class == 0 {
            errs.push(ConfigError::NoClusters);
        }
        if self.class_sep.is_nan() || self.class_sep <= 0.0 {
            errs.push(ConfigError::NonPositiveClassSep(self.class_sep));
        }
        if self.n_features == 0 {
            errs.push(ConfigError::NoFeatures);
        }
        if self.n_informative == 0 {
            errs.push(ConfigError::NoInformative);
        }
        if self.n_informative > self.n_features {
            errs.push(ConfigError::InformativeExceedsFeatures {
                n_informative: self.n_informative,
                n_features: self.n_features,
            });
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Rounds half away from zero; `f64::round` already does, named for intent.
pub fn round_half_away(x: f64) -> usize {
    x.round().max(0.0) as usize
}
