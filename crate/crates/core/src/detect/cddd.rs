//! Centroid distance detector.
//!
//! The statistic is the distance between the centroid of the incoming chunk
//! and the centroid of the reference window, whitened by the reference
//! covariance and expressed in standard errors per dimension:
//!
//! ```text
//! z^2 = (c_t - c_ref)' S_ref^-1 (c_t - c_ref) / ((1/n_t + 1/n_ref) * d)
//! ```
//!
//! Under a stationary stream `z^2` is close to `chi^2_d / d`. A chunk is flagged
//! when `percent * z` exceeds a fixed scale, so higher `percent` flags smaller
//! shifts.
//!
//! The reference pools the last [`WINDOW`] chunks. A chunk whose statistic
//! crosses the most sensitive threshold in range starts a new window.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{check_nonempty, ChunkDetector};
use crate::error::Result;

/// `percent * z` must exceed this for a detection.
pub const DISTANCE_SCALE: f64 = 2.2;

pub(super) fn fires(percent: f64, z: f64) -> bool {
    percent * z > DISTANCE_SCALE
}

/// Reference window length in chunks.
pub const WINDOW: usize = 10;
/// Statistic above which the reference window restarts from the current
/// chunk: the detection threshold of the most sensitive `percent` in range.
pub const RESTART: f64 = DISTANCE_SCALE / 0.95;

#[derive(Clone, Debug)]
pub struct CentroidDistance {
    window: usize,
    chunks: std::collections::VecDeque<Moments>,
    reference: Option<Reference>,
}

impl Default for CentroidDistance {
    fn default() -> Self {
        Self::with_window(WINDOW)
    }
}

/// Raw first and second moments of one chunk.
#[derive(Clone, Debug)]
struct Moments {
    n: usize,
    sum: Array1<f64>,
    outer: Array2<f64>,
}

impl Moments {
    fn of(x: ArrayView2<f64>) -> Self {
        Self { n: x.nrows(), sum: x.sum_axis(Axis(0)), outer: x.t().dot(&x) }
    }
}

#[derive(Clone, Debug)]
struct Reference {
    centroid: Array1<f64>,
    /// Lower Cholesky factor of the (ridged) covariance.
    chol: Array2<f64>,
    rows: usize,
}

impl CentroidDistance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_window(window: usize) -> Self {
        Self { window: window.max(1), chunks: Default::default(), reference: None }
    }

    /// Appends `x` to the reference window, or restarts the window from `x`.
    fn rebuild(&mut self, x: ArrayView2<f64>, restart: bool) {
        if restart {
            self.chunks.clear();
        }
        self.chunks.push_back(Moments::of(x));
        while self.chunks.len() > self.window {
            self.chunks.pop_front();
        }
        let d = x.ncols();
        let mut n = 0usize;
        let mut sum = Array1::<f64>::zeros(d);
        let mut outer = Array2::<f64>::zeros((d, d));
        for m in &self.chunks {
            n += m.n;
            sum += &m.sum;
            outer += &m.outer;
        }
        let nf = n as f64;
        let centroid = sum / nf;
        let mean_outer = centroid
            .view()
            .insert_axis(Axis(1))
            .dot(&centroid.view().insert_axis(Axis(0)));
        let cov = (outer - mean_outer * nf) / (nf - 1.0).max(1.0);
        self.reference = Some(Reference { chol: cholesky_ridged(&cov), centroid, rows: n });
    }

    /// Whitened centroid distance of `x` to the reference.
    pub fn distance(&self, x: ArrayView2<f64>) -> Option<f64> {
        let r = self.reference.as_ref()?;
        let c = x.mean_axis(Axis(0))?;
        let diff = c - &r.centroid;
        let w = forward_substitute(&r.chol, &diff);
        let d = diff.len() as f64;
        let se2 = 1.0 / x.nrows() as f64 + 1.0 / r.rows as f64;
        Some((w.dot(&w) / (se2 * d)).sqrt())
    }
}

impl ChunkDetector for CentroidDistance {
    fn init(&mut self, features: ArrayView2<f64>, _labels: &[usize]) -> Result<()> {
        check_nonempty(features)?;
        self.rebuild(features, true);
        Ok(())
    }

    fn observe(&mut self, features: ArrayView2<f64>) -> Result<f64> {
        check_nonempty(features)?;
        let z = self.distance(features).unwrap_or(0.0);
        self.rebuild(features, z > RESTART);
        Ok(z)
    }
}

/// Cholesky factor of `a + ridge * I`, with a ridge relative to the mean
/// diagonal so that degenerate chunks (constant columns, fewer rows than
/// dimensions) stay factorizable.
pub(crate) fn cholesky_ridged(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let scale = (a.diag().sum() / n as f64).max(1e-12);
    let mut ridge = 1e-9 * scale;
    loop {
        if let Some(l) = cholesky(a, ridge) {
            return l;
        }
        ridge *= 10.0;
    }
}

fn cholesky(a: &Array2<f64>, ridge: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]] + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L w = b` for lower-triangular `L`.
pub(crate) fn forward_substitute(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut w = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * w[k];
        }
        w[i] = s / l[[i, i]];
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, dims: usize, shift: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, dims), || {
            let z: f64 = StandardNormal.sample(rng);
            z + shift
        })
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(&a, 0.0).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let b = array![1.0, -2.0, 0.5];
        let w = forward_substitute(&l, &b);
        let lw = l.dot(&w);
        for (x, y) in lw.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_chunks_factorize() {
        let x = Array2::<f64>::ones((4, 3));
        let mut d = CentroidDistance::new();
        d.init(x.view(), &[]).unwrap();
        assert_eq!(d.observe(x.view()).unwrap(), 0.0);
    }

    #[test]
    fn identical_chunk_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(100, 4, 0.0, &mut rng);
        let mut d = CentroidDistance::new();
        d.init(x.view(), &[]).unwrap();
        let z = d.observe(x.view()).unwrap();
        assert!(z.abs() < 1e-9);
        assert!(!fires(0.95, z));
    }

    #[test]
    fn whitened_distance_is_chi_like_when_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut d = CentroidDistance::new();
        d.init(gaussian(500, 5, 0.0, &mut rng).view(), &[]).unwrap();
        let n = 2000;
        let mean_sq: f64 = (0..n)
            .map(|_| d.observe(gaussian(500, 5, 0.0, &mut rng).view()).unwrap().powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - 1.0).abs() < 0.08, "{mean_sq}");
    }

    #[test]
    fn pooled_reference_matches_stacked_chunks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(50, 3, 0.0, &mut rng);
        let b = gaussian(70, 3, 0.5, &mut rng);
        let mut d = CentroidDistance::with_window(2);
        d.init(a.view(), &[]).unwrap();
        d.rebuild(b.view(), false);
        let all = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let mean = all.mean_axis(Axis(0)).unwrap();
        let centered = &all - &mean;
        let cov = centered.t().dot(&centered) / 119.0;
        let r = d.reference.as_ref().unwrap();
        assert_eq!(r.rows, 120);
        let back = r.chol.dot(&r.chol.t());
        for (x, y) in back.iter().zip(cov.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in r.centroid.iter().zip(mean.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_chunk_fires() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = CentroidDistance::new();
        d.init(gaussian(200, 3, 0.0, &mut rng).view(), &[]).unwrap();
        let z = d.observe(gaussian(200, 3, 1.0, &mut rng).view()).unwrap();
        assert!(fires(0.6, z), "{z}");
    }
}
