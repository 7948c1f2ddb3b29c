//! Unsupervised chunk-level drift detectors.
//!
//! Each detector turns a chunk into a scalar change statistic measured against
//! a reference window of recently processed chunks, and signals a drift when
//! the statistic crosses a threshold set by the detector's sensitivity
//! hyperparameter. The reference is updated after every chunk, and restarted
//! whenever the statistic crosses the most sensitive threshold in range, so
//! the sequence of statistics does not depend on the hyperparameter: for a
//! fixed stream, a stricter setting always detects a subset of what a looser
//! one detects.
//!
//! Only the first chunk is seen with labels (the margin detector needs them to
//! fit its initial classifier); every later chunk is passed as features only.

mod cddd;
mod md3;
mod ocdd;
mod sweep;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cddd::CentroidDistance;
pub use md3::MarginDensity;
pub use ocdd::OneClassOutliers;
pub use sweep::{linspace, replay, run_sweep, DetectionLog, DetectionRecord, SweepStatistics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Cddd,
    Md3,
    Ocdd,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Cddd, DetectorKind::Md3, DetectorKind::Ocdd];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Cddd => "cddd",
            DetectorKind::Md3 => "md3",
            DetectorKind::Ocdd => "ocdd",
        }
    }

    /// Hyperparameter name and its sweep range.
    pub fn param_range(self) -> (&'static str, f64, f64) {
        match self {
            DetectorKind::Cddd => ("percent", 0.6, 0.95),
            DetectorKind::Md3 => ("sigma", 0.1, 0.45),
            DetectorKind::Ocdd => ("sensitivity", 0.3, 2.5),
        }
    }

    /// `n` evenly spaced hyperparameter values over the sweep range.
    pub fn grid(self, n: usize) -> Vec<f64> {
        let (_, lo, hi) = self.param_range();
        linspace(lo, hi, n)
    }

    /// Whether larger hyperparameter values detect more readily.
    pub fn larger_is_more_sensitive(self) -> bool {
        matches!(self, DetectorKind::Cddd)
    }

    /// Orders `grid` from the most to the least sensitive value.
    pub fn by_sensitivity(self, grid: &[f64]) -> Vec<f64> {
        let mut g = grid.to_vec();
        g.sort_by(f64::total_cmp);
        if self.larger_is_more_sensitive() {
            g.reverse();
        }
        g
    }

    /// Fresh detector state. `seed` drives any internal randomness.
    pub fn build(self, seed: u64) -> Box<dyn ChunkDetector + Send> {
        match self {
            DetectorKind::Cddd => Box::new(CentroidDistance::new()),
            DetectorKind::Md3 => Box::new(MarginDensity::new(seed)),
            DetectorKind::Ocdd => Box::new(OneClassOutliers::new()),
        }
    }

    /// Decision rule: does `statistic` signal a drift at hyperparameter `param`?
    pub fn fires(self, param: f64, statistic: f64) -> bool {
        match self {
            DetectorKind::Cddd => cddd::fires(param, statistic),
            DetectorKind::Md3 => md3::fires(param, statistic),
            DetectorKind::Ocdd => ocdd::fires(param, statistic),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cddd" => Ok(DetectorKind::Cddd),
            "md3" => Ok(DetectorKind::Md3),
            "ocdd" => Ok(DetectorKind::Ocdd),
            other => Err(Error::Unsupported(format!(
                "unknown detector '{other}'; supported: cddd, md3, ocdd"
            ))),
        }
    }
}

/// The per-chunk change statistic of a detector.
pub trait ChunkDetector {
    /// Builds the initial reference from the first chunk and its labels.
    fn init(&mut self, features: ArrayView2<f64>, labels: &[usize]) -> Result<()>;

    /// Statistic of `features` against the current reference, after which the
    /// reference is rebuilt from `features`.
    fn observe(&mut self, features: ArrayView2<f64>) -> Result<f64>;
}

/// A detector bound to one hyperparameter value.
pub struct Detector {
    kind: DetectorKind,
    param: f64,
    inner: Box<dyn ChunkDetector + Send>,
    chunks_seen: usize,
    last_detection: Option<usize>,
}

impl Detector {
    pub fn new(kind: DetectorKind, param: f64, seed: u64) -> Self {
        Self { kind, param, inner: kind.build(seed), chunks_seen: 0, last_detection: None }
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn last_detection(&self) -> Option<usize> {
        self.last_detection
    }

    /// Feeds the first chunk; `labels` are read here and never again.
    pub fn init(&mut self, features: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        self.inner.init(features, labels)?;
        self.chunks_seen = 1;
        Ok(())
    }

    /// Feeds the next chunk and reports whether it is flagged as a drift.
    pub fn step(&mut self, features: ArrayView2<f64>) -> Result<bool> {
        if self.chunks_seen == 0 {
            return Err(Error::NotFitted);
        }
        let stat = self.inner.observe(features)?;
        let detected = self.kind.fires(self.param, stat);
        if detected {
            self.last_detection = Some(self.chunks_seen);
        }
        self.chunks_seen += 1;
        Ok(detected)
    }
}

pub(crate) fn check_nonempty(features: ArrayView2<f64>) -> Result<()> {
    if features.nrows() == 0 {
        Err(Error::EmptyChunk)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!("CDDD".parse::<DetectorKind>().unwrap(), DetectorKind::Cddd);
        let err = "padd".parse::<DetectorKind>().unwrap_err().to_string();
        assert!(err.contains("cddd, md3, ocdd"), "{err}");
    }

    #[test]
    fn grids_span_ranges() {
        let g = DetectorKind::Md3.grid(10);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.1).abs() < 1e-12 && (g[9] - 0.45).abs() < 1e-12);
        assert_eq!(DetectorKind::Ocdd.grid(1), vec![0.3]);
        let order = DetectorKind::Cddd.by_sensitivity(&DetectorKind::Cddd.grid(3));
        assert!(order[0] > order[2]);
    }

    #[test]
    fn step_before_init_is_rejected() {
        let mut d = Detector::new(DetectorKind::Cddd, 0.9, 0);
        let x = ndarray::Array2::<f64>::zeros((3, 2));
        assert!(matches!(d.step(x.view()), Err(Error::NotFitted)));
    }
}
