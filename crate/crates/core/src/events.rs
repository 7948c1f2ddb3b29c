//! Ground-truth placement of drifts and novel-class emergences.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::GeneratorConfig;
use crate::error::{Error, Result};
use crate::seed::{Purpose, SeedTree};

/// Chunk indices of every drift and of every unknown-class emergence.
///
/// `novelty_chunks[i]` is the first chunk holding the unknown class labelled
/// `n_classes + i`. Both lists are sorted and never contain chunk 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_chunks: usize,
    pub drift_chunks: Vec<usize>,
    pub novelty_chunks: Vec<usize>,
}

/// Places `n_events` events in `(0, n_chunks)`.
///
/// Even placement puts event `i` (1-based) at `floor(n_chunks * i / (n_events + 1))`
/// and ignores `rng`; random placement draws distinct indices uniformly.
pub fn place_events<R: Rng + ?Sized>(
    n_chunks: usize,
    n_events: usize,
    even: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_events >= n_chunks {
        return Err(Error::TooManyEvents { events: n_events, n_chunks });
    }
    if even {
        return Ok((1..=n_events).map(|i| n_chunks * i / (n_events + 1)).collect());
    }
    let mut picks: Vec<usize> = index::sample(rng, n_chunks - 1, n_events)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picks.sort_unstable();
    Ok(picks)
}

impl GroundTruth {
    /// Places drifts and novelties independently, each from its own sub-seed.
    pub fn from_config(config: &GeneratorConfig, seeds: &SeedTree) -> Result<Self> {
        let drift_chunks = place_events(
            config.n_chunks,
            config.n_drifts,
            config.even_gt,
            &mut seeds.rng(Purpose::DriftPlacement, 0),
        )?;
        let novelty_chunks = place_events(
            config.n_chunks,
            config.n_novel,
            config.even_gt,
            &mut seeds.rng(Purpose::NoveltyPlacement, 0),
        )?;
        Ok(Self { n_chunks: config.n_chunks, drift_chunks, novelty_chunks })
    }

    fn check(&self, chunk_index: usize) -> Result<()> {
        if chunk_index >= self.n_chunks {
            return Err(Error::ChunkOutOfRange { index: chunk_index, n_chunks: self.n_chunks });
        }
        Ok(())
    }

    /// Index of the known-class concept in force at `chunk_index`.
    ///
    /// A drift takes effect at its own chunk.
    pub fn concept_at(&self, chunk_index: usize) -> Result<usize> {
        self.check(chunk_index)?;
        Ok(self.drift_chunks.partition_point(|&d| d <= chunk_index))
    }

    /// Number of unknown classes that have emerged by `chunk_index`.
    pub fn n_emerged(&self, chunk_index: usize) -> usize {
        self.novelty_chunks.partition_point(|&n| n <= chunk_index)
    }

    /// Labels of every unknown class present at `chunk_index`, oldest first.
    pub fn active_unknowns(&self, n_classes: usize, chunk_index: usize) -> Vec<usize> {
        (0..self.n_emerged(chunk_index)).map(|i| n_classes + i).collect()
    }

    /// All event chunks with their kind, ordered by chunk.
    pub fn events(&self) -> Vec<Event> {
        let mut ev: Vec<Event> = self
            .drift_chunks
            .iter()
            .enumerate()
            .map(|(i, &chunk)| Event { chunk, kind: EventKind::Drift, ordinal: i })
            .chain(
                self.novelty_chunks
                    .iter()
                    .enumerate()
                    .map(|(i, &chunk)| Event { chunk, kind: EventKind::Novelty, ordinal: i }),
            )
            .collect();
        ev.sort_by_key(|e| (e.chunk, e.kind));
        ev
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Drift,
    Novelty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub chunk: usize,
    pub kind: EventKind,
    pub ordinal: usize,
}

impl Event {
    /// Short marker used on plots: `D0`, `N2`, ...
    pub fn marker(&self) -> String {
        match self.kind {
            EventKind::Drift => format!("D{}", self.ordinal),
            EventKind::Novelty => format!("N{}", self.ordinal),
        }
    }
}
