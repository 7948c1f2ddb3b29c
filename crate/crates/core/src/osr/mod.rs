//! Incremental open-set recognition baseline.
//!
//! A perceptron is trained chunk by chunk on the classes whose labels have
//! been revealed. A row is accepted as known when its maximum softmax support
//! exceeds `theta = mu - epsilon * sigma`, where `mu` and `sigma` summarize
//! the maximum supports of the latest training rows; everything else is
//! rejected as unknown.
//!
//! Unknown class `i` has its labels revealed from the chunk where unknown
//! class `i + 1` emerges. The last unknown class is never revealed.

mod mlp;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::GroundTruth;
use crate::metrics::{argmax, confusion_matrix, score_chunk, OpenLabel, OsrScores};
use crate::seed::{Purpose, SeedTree};
use crate::stream::StreamDataset;

pub use mlp::{softmax, FitReport, Gradients, MlpConfig, MlpModel};

/// Rejection threshold derived from training supports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub epsilon: f64,
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
}

impl ThresholdPolicy {
    /// Before any update the threshold rejects nothing.
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, mu: 0.0, sigma: 0.0, theta: f64::NEG_INFINITY }
    }

    /// Re-derives `mu`, `sigma` (population) and `theta` from per-row maximum
    /// supports. An empty slice leaves the policy unchanged.
    pub fn update(&mut self, max_supports: &[f64]) {
        if max_supports.is_empty() {
            return;
        }
        let n = max_supports.len() as f64;
        let mu = max_supports.iter().sum::<f64>() / n;
        let var = max_supports.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / n;
        self.mu = mu;
        self.sigma = var.sqrt();
        self.theta = self.mu - self.epsilon * self.sigma;
    }

    /// Updates from the model's supports on its training rows.
    pub fn update_from(&mut self, model: &MlpModel, training: ArrayView2<f64>) -> Result<()> {
        let supports = model.supports(training)?;
        self.update(&max_supports(&supports));
        Ok(())
    }
}

pub fn max_supports(supports: &Array2<f64>) -> Vec<f64> {
    supports.outer_iter().map(|r| r.fold(f64::NEG_INFINITY, |a, &b| a.max(b))).collect()
}

/// Open-set verdicts from precomputed supports.
pub fn verdicts(supports: &Array2<f64>, theta: f64) -> Vec<OpenLabel> {
    supports
        .outer_iter()
        .map(|row| {
            let best = argmax(row.iter().copied());
            if row[best] > theta {
                OpenLabel::Known(best)
            } else {
                OpenLabel::Unknown
            }
        })
        .collect()
}

/// Labels in `0..active_outputs` or `Unknown`, plus the supports behind them.
pub fn predict_open(
    model: &MlpModel,
    policy: &ThresholdPolicy,
    features: ArrayView2<f64>,
) -> Result<(Vec<OpenLabel>, Array2<f64>)> {
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    let supports = model.supports(features)?;
    Ok((verdicts(&supports, policy.theta), supports))
}

/// Number of unknown classes whose labels are trainable at chunk `t`.
pub fn revealed_unknowns(ground_truth: &GroundTruth, t: usize) -> usize {
    ground_truth.novelty_chunks.iter().skip(1).filter(|&&c| c <= t).count()
}

/// Ground truth with the first `n_known` stream labels known and the rest
/// unknown.
pub fn open_truth(labels: &[usize], n_known: usize) -> Vec<OpenLabel> {
    labels
        .iter()
        .map(|&l| if l < n_known { OpenLabel::Known(l) } else { OpenLabel::Unknown })
        .collect()
}

/// Scores of one chunk under one epsilon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub epsilon: f64,
    pub seed: u64,
    pub chunk: usize,
    pub scores: OsrScores,
}

/// Per-chunk training audit: how many rows of each stream label were used.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingAudit {
    pub chunk: usize,
    pub rows_per_label: Vec<usize>,
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OsrRun {
    pub seed: u64,
    pub epsilons: Vec<f64>,
    /// Chunk 0 only trains, so records start at chunk 1.
    pub records: Vec<ScoreRecord>,
    /// Active outputs after training on each chunk.
    pub active_outputs: Vec<usize>,
    pub audit: Vec<TrainingAudit>,
    /// `confusion[e][t - 1]` for epsilon `e` and chunk `t`, when requested.
    pub confusion: Option<Vec<Vec<Array2<u64>>>>,
}

impl OsrRun {
    pub fn scores(&self, epsilon: f64) -> Vec<&ScoreRecord> {
        self.records.iter().filter(|r| r.epsilon == epsilon).collect()
    }
}

/// Test-then-train run over the whole stream.
///
/// Training does not depend on epsilon, so one model is trained per seed and
/// every epsilon thresholds the same supports; this equals running one
/// identically seeded replica per epsilon.
pub fn run_osr(
    stream: &StreamDataset,
    epsilons: &[f64],
    seed: u64,
    config: &MlpConfig,
    keep_confusion: bool,
) -> Result<OsrRun> {
    if stream.config.hide_label {
        return Err(Error::Unsupported(
            "open-set evaluation needs true unknown-class identities; regenerate the stream with hide_label = false"
                .into(),
        ));
    }
    let n_c = stream.config.n_classes;
    let n_outputs = n_c + stream.config.n_novel;
    let mut rng = SeedTree::new(seed).rng(Purpose::Classifier, 0);
    let mut model = MlpModel::new(stream.n_features(), config.hidden, n_outputs, n_c, &mut rng);
    let mut policies: Vec<ThresholdPolicy> = epsilons.iter().map(|&e| ThresholdPolicy::new(e)).collect();

    let mut records = Vec::new();
    let mut active_outputs = Vec::with_capacity(stream.chunks.len());
    let mut audit = Vec::with_capacity(stream.chunks.len());
    let mut confusion = keep_confusion.then(|| vec![Vec::new(); epsilons.len()]);

    for chunk in &stream.chunks {
        let t = chunk.chunk_index;
        let n_trainable = n_c + revealed_unknowns(&stream.ground_truth, t);
        if model.is_fitted() {
            // classes revealed at t already count as known, though not yet trained
            let truth = open_truth(&chunk.labels, n_trainable);
            let supports = model.supports(chunk.features.view())?;
            for (e, policy) in policies.iter().enumerate() {
                let pred = verdicts(&supports, policy.theta);
                records.push(ScoreRecord {
                    epsilon: policy.epsilon,
                    seed,
                    chunk: t,
                    scores: score_chunk(&truth, &pred, supports.view()),
                });
                if let Some(c) = confusion.as_mut() {
                    c[e].push(confusion_matrix(&truth, &pred, n_trainable));
                }
            }
        }

        model.activate(n_trainable);
        let rows: Vec<usize> = (0..chunk.len()).filter(|&i| chunk.labels[i] < n_trainable).collect();
        let x = chunk.features.select(Axis(0), &rows);
        let y: Vec<usize> = rows.iter().map(|&i| chunk.labels[i]).collect();
        let report = model.partial_fit(x.view(), &y, config)?;

        let mut rows_per_label = vec![0usize; n_outputs];
        for &l in &y {
            rows_per_label[l] += 1;
        }
        audit.push(TrainingAudit { chunk: t, rows_per_label, losses: report.losses });
        active_outputs.push(model.active_outputs());

        if !report.skipped {
            let supports = model.supports(x.view())?;
            let maxes = max_supports(&supports);
            for policy in policies.iter_mut() {
                policy.update(&maxes);
            }
        }
    }

    Ok(OsrRun { seed, epsilons: epsilons.to_vec(), records, active_outputs, audit, confusion })
}

/// [`run_osr`] over several seeds in parallel.
pub fn run_osr_seeds(
    stream: &StreamDataset,
    epsilons: &[f64],
    seeds: &[u64],
    config: &MlpConfig,
    keep_confusion: bool,
) -> Result<Vec<OsrRun>> {
    seeds.par_iter().map(|&s| run_osr(stream, epsilons, s, config, keep_confusion)).collect()
}
