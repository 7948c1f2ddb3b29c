//! Static class generation on hypercube vertices.
//!
//! Every class of every concept owns `n_clusters_per_class` Gaussian clusters.
//! A cluster is centred on a distinct vertex of the hypercube `{-s, +s}^d`
//! (`s = class_sep`) and shaped by its own random mixing matrix:
//!
//! ```text
//! x = vertex + mixing * z,   z ~ N(0, I_d)
//! ```
//!
//! When the requested informative dimensionality cannot hold all clusters on
//! distinct vertices, the generator raises `d` to the smallest sufficient value
//! and projects samples down to `n_features` with a Gaussian random matrix.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::config::GeneratorConfig;
use crate::error::{Error, Result};
use crate::seed::{Purpose, SeedTree};

/// Smallest `d` with `2^d > n_total_clusters`.
pub fn required_dims(n_total_clusters: usize) -> usize {
    let mut d = 1;
    while !fits_on_hypercube(d, n_total_clusters) {
        d += 1;
    }
    d
}

/// Whether `n_clusters` vertices fit on a `dims`-dimensional hypercube.
pub fn fits_on_hypercube(dims: usize, n_clusters: usize) -> bool {
    dims >= usize::BITS as usize || (1usize << dims) > n_clusters
}

/// Total cluster count: one set of known-class clusters per concept plus the
/// unknown-class clusters, which are shared by all concepts.
pub fn total_clusters(config: &GeneratorConfig) -> usize {
    ((config.n_drifts + 1) * config.n_classes + config.n_novel) * config.n_clusters_per_class
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub cluster_id: usize,
    pub vertex: Array1<f64>,
    pub mixing: Array2<f64>,
}

impl ClusterModel {
    /// `count` rows in the generation space (`count x d_gen`).
    fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Array2<f64> {
        let d = self.vertex.len();
        let z = Array2::from_shape_simple_fn((count, d), || StandardNormal.sample(rng));
        z.dot(&self.mixing.t()) + &self.vertex
    }
}

/// Why the generator projects samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionReason {
    /// `n_informative` was too small to place every cluster on its own vertex.
    DimensionalityCorrection,
    /// `n_features` exceeds `n_informative`; the extra columns are projected.
    Padding,
}

#[derive(Clone, Debug)]
pub struct StaticGenerator {
    clusters: Vec<ClusterModel>,
    d_gen: usize,
    n_features: usize,
    n_classes: usize,
    n_concepts: usize,
    n_novel: usize,
    clusters_per_class: usize,
    projection: Option<Array2<f64>>,
    projection_reason: Option<ProjectionReason>,
}

impl StaticGenerator {
    /// Builds the cluster geometry for `config` from the geometry and
    /// projection sub-seeds of `seeds`.
    pub fn build(config: &GeneratorConfig, seeds: &SeedTree) -> Result<Self> {
        config.validate()?;
        let n_total = total_clusters(config);
        let (d_gen, projection_reason) = if fits_on_hypercube(config.n_informative, n_total) {
            let reason = (config.n_features > config.n_informative).then_some(ProjectionReason::Padding);
            (config.n_informative, reason)
        } else if config.allow_projection {
            (required_dims(n_total), Some(ProjectionReason::DimensionalityCorrection))
        } else {
            return Err(Error::DimensionalityTooLow {
                clusters: n_total,
                n_informative: config.n_informative,
            });
        };

        let mut rng = seeds.rng(Purpose::ClusterGeometry, 0);
        let vertices = distinct_vertices(n_total, d_gen, &mut rng);
        let unit = Uniform::new(-1.0, 1.0).expect("valid range");
        let clusters = vertices
            .into_iter()
            .enumerate()
            .map(|(cluster_id, bits)| {
                let vertex = bits
                    .iter()
                    .map(|&b| if b { config.class_sep } else { -config.class_sep })
                    .collect();
                let mixing = Array2::from_shape_simple_fn((d_gen, d_gen), || unit.sample(&mut rng));
                ClusterModel { cluster_id, vertex, mixing }
            })
            .collect();

        let projection = projection_reason.map(|_| {
            random_projection(d_gen, config.n_features, &mut seeds.rng(Purpose::Projection, 0))
        });

        Ok(Self {
            clusters,
            d_gen,
            n_features: config.n_features,
            n_classes: config.n_classes,
            n_concepts: config.n_drifts + 1,
            n_novel: config.n_novel,
            clusters_per_class: config.n_clusters_per_class,
            projection,
            projection_reason,
        })
    }

    pub fn clusters(&self) -> &[ClusterModel] {
        &self.clusters
    }

    pub fn n_total(&self) -> usize {
        self.clusters.len()
    }

    pub fn d_gen(&self) -> usize {
        self.d_gen
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn clusters_per_class(&self) -> usize {
        self.clusters_per_class
    }

    pub fn projection(&self) -> Option<&Array2<f64>> {
        self.projection.as_ref()
    }

    pub fn projection_reason(&self) -> Option<ProjectionReason> {
        self.projection_reason
    }

    /// Cluster of known class `class` under concept `concept`.
    pub fn known_cluster(&self, concept: usize, class: usize, sub_cluster: usize) -> usize {
        debug_assert!(concept < self.n_concepts && class < self.n_classes);
        debug_assert!(sub_cluster < self.clusters_per_class);
        (concept * self.n_classes + class) * self.clusters_per_class + sub_cluster
    }

    /// Cluster of unknown class `uc_index`; no concept dependence.
    pub fn unknown_cluster(&self, uc_index: usize, sub_cluster: usize) -> usize {
        debug_assert!(uc_index < self.n_novel && sub_cluster < self.clusters_per_class);
        (self.n_concepts * self.n_classes + uc_index) * self.clusters_per_class + sub_cluster
    }

    /// `count` samples of one cluster, in output feature space.
    pub fn sample_cluster<R: Rng + ?Sized>(
        &self,
        cluster_id: usize,
        count: usize,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let cluster = self
            .clusters
            .get(cluster_id)
            .ok_or(Error::UnknownCluster { id: cluster_id, total: self.clusters.len() })?;
        let raw = cluster.draw(count, rng);
        match &self.projection {
            Some(p) => project(raw.view(), p.view()),
            None => Ok(raw),
        }
    }
}

/// `n` distinct vertices of the `dims`-dimensional hypercube, uniformly
/// without replacement, as sign patterns.
fn distinct_vertices<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<bool>> {
    debug_assert!(fits_on_hypercube(dims, n));
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<bool> = (0..dims).map(|_| rng.random()).collect();
        if seen.insert(v.clone()) {
            out.push(v);
        }
    }
    out
}

/// Gaussian random projection with entries `N(0, 1) / sqrt(d_in)`.
pub fn random_projection<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Array2<f64> {
    let scale = 1.0 / (d_in as f64).sqrt();
    Array2::from_shape_simple_fn((d_in, d_out), || {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

pub fn project(data: ArrayView2<f64>, projection: ArrayView2<f64>) -> Result<Array2<f64>> {
    if data.len_of(Axis(1)) != projection.len_of(Axis(0)) {
        return Err(Error::ShapeMismatch(format!(
            "data has {} columns but projection has {} rows",
            data.ncols(),
            projection.nrows()
        )));
    }
    Ok(data.dot(&projection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((a.nrows(), b.ncols()));
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                let mut s = 0.0;
                for k in 0..a.ncols() {
                    s += a[[i, k]] * b[[k, j]];
                }
                out[[i, j]] = s;
            }
        }
        out
    }

    #[test]
    fn required_dims_examples() {
        assert_eq!(required_dims(7), 3);
        assert_eq!(required_dims(1), 1);
        assert_eq!(required_dims(8), 4);
        assert_eq!(required_dims(6), 3);
        assert_eq!(required_dims(2), 2);
    }

    #[test]
    fn defaults_need_no_projection() {
        let g = StaticGenerator::build(&GeneratorConfig::default(), &SeedTree::new(1)).unwrap();
        assert_eq!(g.n_total(), 2);
        assert_eq!(g.d_gen(), 10);
        assert!(g.projection().is_none());
    }

    #[test]
    fn planar_streams_project_from_three_dims() {
        let cfg = GeneratorConfig {
            n_features: 2,
            n_informative: 2,
            n_drifts: 1,
            n_novel: 2,
            ..Default::default()
        };
        let g = StaticGenerator::build(&cfg, &SeedTree::new(3)).unwrap();
        assert_eq!(g.n_total(), 6);
        assert_eq!(g.d_gen(), 3);
        assert_eq!(g.projection().unwrap().dim(), (3, 2));
        assert_eq!(g.projection_reason(), Some(ProjectionReason::DimensionalityCorrection));
        let x = g.sample_cluster(5, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(x.dim(), (4, 2));

        let strict = GeneratorConfig { allow_projection: false, ..cfg };
        assert!(matches!(
            StaticGenerator::build(&strict, &SeedTree::new(3)),
            Err(Error::DimensionalityTooLow { clusters: 6, n_informative: 2 })
        ));
    }

    #[test]
    fn padding_projects_up() {
        let cfg = GeneratorConfig { n_features: 12, n_informative: 4, ..Default::default() };
        let g = StaticGenerator::build(&cfg, &SeedTree::new(3)).unwrap();
        assert_eq!(g.d_gen(), 4);
        assert_eq!(g.projection().unwrap().dim(), (4, 12));
        assert_eq!(g.projection_reason(), Some(ProjectionReason::Padding));
    }

    #[test]
    fn cluster_map_layout() {
        let cfg = GeneratorConfig {
            n_drifts: 2,
            n_novel: 3,
            n_clusters_per_class: 2,
            ..Default::default()
        };
        let g = StaticGenerator::build(&cfg, &SeedTree::new(0)).unwrap();
        assert_eq!(g.n_total(), (3 * 2 + 3) * 2);
        let mut ids = HashSet::new();
        for concept in 0..3 {
            for class in 0..2 {
                for s in 0..2 {
                    assert!(ids.insert(g.known_cluster(concept, class, s)));
                }
            }
        }
        for uc in 0..3 {
            for s in 0..2 {
                assert!(ids.insert(g.unknown_cluster(uc, s)));
            }
        }
        assert_eq!(ids.len(), g.n_total());
        assert!(ids.iter().all(|&i| i < g.n_total()));
        // drift moves every known class
        for class in 0..2 {
            assert_ne!(g.known_cluster(0, class, 0), g.known_cluster(1, class, 0));
        }
    }

    #[test]
    fn vertices_distinct_and_scaled() {
        // 2^3 = 8 > 7: the tightest legal packing
        let cfg = GeneratorConfig {
            n_drifts: 2,
            n_novel: 1,
            n_features: 3,
            n_informative: 3,
            class_sep: 2.5,
            allow_projection: false,
            ..Default::default()
        };
        let g = StaticGenerator::build(&cfg, &SeedTree::new(11)).unwrap();
        assert_eq!(g.n_total(), 7);
        let set: HashSet<Vec<i8>> = g
            .clusters()
            .iter()
            .map(|c| c.vertex.iter().map(|&v| v.signum() as i8).collect())
            .collect();
        assert_eq!(set.len(), 7);
        for c in g.clusters() {
            assert!(c.vertex.iter().all(|&v| v.abs() == 2.5));
            assert!(c.mixing.iter().all(|&m| (-1.0..1.0).contains(&m)));
        }
    }

    #[test]
    fn vertices_exhaustively_distinct_up_to_4096() {
        for (n, d) in [(1usize, 1usize), (3, 2), (15, 4), (255, 8), (4095, 12)] {
            let v = distinct_vertices(n, d, &mut ChaCha8Rng::seed_from_u64(n as u64));
            let set: HashSet<_> = v.iter().collect();
            assert_eq!(set.len(), n);
        }
    }

    #[test]
    fn unknown_cluster_id_rejected() {
        let g = StaticGenerator::build(&GeneratorConfig::default(), &SeedTree::new(1)).unwrap();
        assert!(matches!(
            g.sample_cluster(2, 1, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::UnknownCluster { id: 2, total: 2 })
        ));
        let empty = g.sample_cluster(0, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(empty.dim(), (0, 10));
    }

    #[test]
    fn identity_mixing_mean_converges_to_vertex() {
        let cfg = GeneratorConfig { n_features: 4, n_informative: 4, ..Default::default() };
        let mut g = StaticGenerator::build(&cfg, &SeedTree::new(5)).unwrap();
        g.clusters[1].mixing = Array2::eye(4);
        let n = 100_000;
        let x = g.sample_cluster(1, n, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let tol = 3.0 / (n as f64).sqrt();
        for (m, v) in mean.iter().zip(g.clusters[1].vertex.iter()) {
            assert!((m - v).abs() < tol, "{m} vs {v}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = StaticGenerator::build(&GeneratorConfig::default(), &SeedTree::new(1)).unwrap();
        let a = g.sample_cluster(0, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = g.sample_cluster(0, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let g2 = StaticGenerator::build(&GeneratorConfig::default(), &SeedTree::new(1)).unwrap();
        assert_eq!(g.clusters(), g2.clusters());
    }

    #[test]
    fn project_examples() {
        let x = array![[1.0, 2.0, 3.0], [-4.0, 0.5, 2.0]];
        assert_eq!(project(x.view(), Array2::eye(3).view()).unwrap(), x);
        let z = Array2::<f64>::zeros((5, 3));
        let p = random_projection(3, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(project(z.view(), p.view()).unwrap(), Array2::<f64>::zeros((5, 2)));
        assert!(matches!(project(x.view(), p.t()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn projection_entries_scaled() {
        let d = 16;
        let p = random_projection(d, 4000, &mut ChaCha8Rng::seed_from_u64(2));
        let var = p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        assert!((var * d as f64 - 1.0).abs() < 0.03, "{var}");
    }

    proptest! {
        #[test]
        fn project_matches_naive(rows in 0usize..6, inner in 1usize..5, cols in 1usize..5, seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = Uniform::new(-3.0, 3.0).unwrap();
            let x = Array2::from_shape_simple_fn((rows, inner), || u.sample(&mut rng));
            let p = Array2::from_shape_simple_fn((inner, cols), || u.sample(&mut rng));
            let fast = project(x.view(), p.view()).unwrap();
            let slow = naive_matmul(&x, &p);
            prop_assert_eq!(fast.dim(), (rows, cols));
            for (a, b) in fast.iter().zip(slow.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
