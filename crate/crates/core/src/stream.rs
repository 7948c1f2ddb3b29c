//! Assembly of static samples into a chunked stream.

use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::config::GeneratorConfig;
use crate::error::Result;
use crate::events::GroundTruth;
use crate::generator::StaticGenerator;
use crate::seed::{Purpose, SeedTree};

/// One batch of the stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Chunk {
    pub chunk_index: usize,
    /// `chunk_size x n_features`.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count_label(&self, label: usize) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// A fully generated stream together with its configuration and events.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamDataset {
    pub config: GeneratorConfig,
    pub master_seed: u64,
    pub ground_truth: GroundTruth,
    pub chunks: Vec<Chunk>,
}

impl StreamDataset {
    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.config.n_features
    }
}

/// Per-class row counts for a chunk: floors of `weights * chunk_size`, with the
/// remainder handed out one row at a time by descending weight (lower class
/// index first on ties).
pub fn kc_allocation(weights: &[f64], chunk_size: usize) -> Vec<usize> {
    // the 1e-9 slack keeps e.g. 0.3 * 10 from flooring to 2
    let mut counts: Vec<usize> =
        weights.iter().map(|w| (w * chunk_size as f64 + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned >= chunk_size {
        // only reachable through rounding slack; trim from the smallest classes
        let mut excess = assigned - chunk_size;
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a)));
        for &k in order.iter().cycle() {
            if excess == 0 {
                break;
            }
            if counts[k] > 0 {
                counts[k] -= 1;
                excess -= 1;
            }
        }
        return counts;
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    for &k in order.iter().cycle().take(chunk_size - assigned) {
        counts[k] += 1;
    }
    counts
}

/// Draws `count` rows of a class with per-row uniform sub-cluster choice.
fn sample_class<R: Rng + ?Sized>(
    gen: &StaticGenerator,
    count: usize,
    cluster_of: impl Fn(usize) -> usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let k = gen.clusters_per_class();
    if k == 1 {
        return gen.sample_cluster(cluster_of(0), count, rng);
    }
    let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..k)).collect();
    let mut out = Array2::zeros((count, gen.n_features()));
    for sub in 0..k {
        let rows: Vec<usize> = (0..count).filter(|&i| picks[i] == sub).collect();
        let block = gen.sample_cluster(cluster_of(sub), rows.len(), rng)?;
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(i).assign(&block.row(r));
        }
    }
    Ok(out)
}

/// Builds chunk `chunk_index`: known-class rows of the current concept, then
/// each active unknown class overwriting `round(percentage_novel * chunk_size)`
/// uniformly chosen positions (oldest first), then a row shuffle.
pub fn assemble_chunk(
    gen: &StaticGenerator,
    gt: &GroundTruth,
    config: &GeneratorConfig,
    chunk_index: usize,
    seeds: &SeedTree,
) -> Result<Chunk> {
    assemble_chunk_with(gen, gt, config, chunk_index, seeds, true)
}

/// [`assemble_chunk`] with the final shuffle optionally disabled. Sampled values
/// do not depend on `shuffle`, only their order.
pub fn assemble_chunk_with(
    gen: &StaticGenerator,
    gt: &GroundTruth,
    config: &GeneratorConfig,
    chunk_index: usize,
    seeds: &SeedTree,
    shuffle: bool,
) -> Result<Chunk> {
    let concept = gt.concept_at(chunk_index)?;
    let t = chunk_index as u64;
    let n = config.chunk_size;

    let mut known_rng = seeds.rng(Purpose::KnownSampling, t);
    let counts = kc_allocation(&config.class_weights(), n);
    let mut blocks = Vec::with_capacity(counts.len());
    let mut labels = Vec::with_capacity(n);
    for (class, &count) in counts.iter().enumerate() {
        blocks.push(sample_class(gen, count, |s| gen.known_cluster(concept, class, s), &mut known_rng)?);
        labels.extend(std::iter::repeat_n(class, count));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let mut features = ndarray::concatenate(Axis(0), &views).expect("blocks share a width");

    let mut unknown_rng = seeds.rng(Purpose::UnknownSampling, t);
    let mut position_rng = seeds.rng(Purpose::Replacement, t);
    let novel_rows = config.novel_rows();
    for uc in 0..gt.n_emerged(chunk_index) {
        let rows = sample_class(gen, novel_rows, |s| gen.unknown_cluster(uc, s), &mut unknown_rng)?;
        let positions = index::sample(&mut position_rng, n, novel_rows);
        for (r, pos) in positions.into_iter().enumerate() {
            features.row_mut(pos).assign(&rows.row(r));
            labels[pos] = config.n_classes + uc;
        }
    }

    if shuffle {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeds.rng(Purpose::Shuffle, t));
        features = features.select(Axis(0), &order);
        labels = order.iter().map(|&i| labels[i]).collect();
    }

    if config.hide_label {
        for l in labels.iter_mut() {
            *l = (*l).min(config.n_classes);
        }
    }

    Ok(Chunk { chunk_index, features, labels })
}

/// Generates the full stream. `random_state` seeds everything; when absent a
/// fresh master seed is drawn and recorded on the dataset.
pub fn generate_stream(config: &GeneratorConfig) -> Result<StreamDataset> {
    let master = config.random_state.unwrap_or_else(|| rand::rng().random_range(0..=i64::MAX as u64));
    generate_stream_seeded(config, master)
}

pub fn generate_stream_seeded(config: &GeneratorConfig, master_seed: u64) -> Result<StreamDataset> {
    config.validate()?;
    let seeds = SeedTree::new(master_seed);
    let ground_truth = GroundTruth::from_config(config, &seeds)?;
    let gen = StaticGenerator::build(config, &seeds)?;
    let chunks = (0..config.n_chunks)
        .into_par_iter()
        .map(|t| assemble_chunk(&gen, &ground_truth, config, t, &seeds))
        .collect::<Result<Vec<_>>>()?;
    Ok(StreamDataset { config: config.clone(), master_seed, ground_truth, chunks })
}
