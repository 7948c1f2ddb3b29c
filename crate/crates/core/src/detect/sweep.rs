use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Detector, DetectorKind};
use crate::error::Result;
use crate::seed::{Purpose, SeedTree};
use crate::stream::StreamDataset;

/// `n` evenly spaced values from `lo` to `hi` inclusive (`[lo]` when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub detector: DetectorKind,
    pub param: f64,
    pub seed: u64,
    pub chunk: usize,
}

/// Detections of a sweep, plus the list of replays that produced them (a
/// replay without detections leaves no record otherwise).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionLog {
    pub records: Vec<DetectionRecord>,
    pub replays: Vec<(DetectorKind, f64, u64)>,
}

impl DetectionLog {
    pub fn extend(&mut self, other: DetectionLog) {
        self.records.extend(other.records);
        self.replays.extend(other.replays);
    }

    /// Detection chunks of one replay, ascending.
    pub fn chunks(&self, detector: DetectorKind, param: f64, seed: u64) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.detector == detector && r.param == param && r.seed == seed)
            .map(|r| r.chunk)
            .collect()
    }
}

/// Statistic trace of one detector over one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStatistics {
    pub detector: DetectorKind,
    pub seed: u64,
    /// `statistics[t - 1]` belongs to chunk `t`; chunk 0 initializes.
    pub statistics: Vec<f64>,
}

impl SweepStatistics {
    pub fn compute(stream: &StreamDataset, detector: DetectorKind, seed: u64) -> Result<Self> {
        let mut state = detector.build(SeedTree::new(seed).sub_seed(Purpose::Detector, 0));
        let mut statistics = Vec::with_capacity(stream.chunks.len().saturating_sub(1));
        if let Some((first, rest)) = stream.chunks.split_first() {
            state.init(first.features.view(), &first.labels)?;
            for chunk in rest {
                statistics.push(state.observe(chunk.features.view())?);
            }
        }
        Ok(Self { detector, seed, statistics })
    }

    pub fn detections(&self, param: f64) -> Vec<usize> {
        self.statistics
            .iter()
            .enumerate()
            .filter(|(_, &s)| self.detector.fires(param, s))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Replays `stream` once per `(param, seed)` and logs every detection.
///
/// The detector reference does not depend on the hyperparameter, so each
/// seed's statistic trace is computed once and thresholded per grid value;
/// the result equals a chunk-by-chunk replay with [`Detector::step`].
pub fn run_sweep(
    stream: &StreamDataset,
    detector: DetectorKind,
    grid: &[f64],
    seeds: &[u64],
) -> Result<DetectionLog> {
    let traces = seeds
        .par_iter()
        .map(|&seed| SweepStatistics::compute(stream, detector, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut log = DetectionLog::default();
    for trace in &traces {
        for &param in grid {
            log.replays.push((detector, param, trace.seed));
            log.records.extend(trace.detections(param).into_iter().map(|chunk| DetectionRecord {
                detector,
                param,
                seed: trace.seed,
                chunk,
            }));
        }
    }
    Ok(log)
}

/// Chunk-by-chunk replay with a single hyperparameter value.
pub fn replay(stream: &StreamDataset, detector: DetectorKind, param: f64, seed: u64) -> Result<Vec<usize>> {
    let mut d = Detector::new(detector, param, SeedTree::new(seed).sub_seed(Purpose::Detector, 0));
    let mut hits = Vec::new();
    if let Some((first, rest)) = stream.chunks.split_first() {
        d.init(first.features.view(), &first.labels)?;
        for chunk in rest {
            if d.step(chunk.features.view())? {
                hits.push(chunk.chunk_index);
            }
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GeneratorConfig;
    use crate::stream::generate_stream;

    fn stream(n_chunks: usize) -> StreamDataset {
        generate_stream(&GeneratorConfig {
            n_chunks,
            n_drifts: usize::from(n_chunks > 2),
            n_novel: usize::from(n_chunks > 2),
            n_features: 5,
            n_informative: 5,
            percentage_novel: 0.3,
            random_state: Some(4),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn single_chunk_gives_empty_log() {
        let s = stream(1);
        let log = run_sweep(&s, DetectorKind::Cddd, &[0.9], &[0, 1]).unwrap();
        assert!(log.records.is_empty());
        assert_eq!(log.replays.len(), 2);
    }

    #[test]
    fn sweep_equals_stepwise_replay() {
        let s = stream(40);
        for kind in DetectorKind::ALL {
            let grid = kind.grid(4);
            let log = run_sweep(&s, kind, &grid, &[3]).unwrap();
            for &p in &grid {
                assert_eq!(log.chunks(kind, p, 3), replay(&s, kind, p, 3).unwrap(), "{kind} {p}");
            }
        }
    }

    #[test]
    fn detections_are_strictly_increasing() {
        let s = stream(40);
        let log = run_sweep(&s, DetectorKind::Ocdd, &[0.3], &[0]).unwrap();
        let c = log.chunks(DetectorKind::Ocdd, 0.3, 0);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(!c.is_empty());
    }
}
