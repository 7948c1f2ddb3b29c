//! One-class outlier-rate detector.
//!
//! The one-class model is a nearest-neighbour level set of a reference
//! window of recent chunks: a row is an outlier when its distance to the
//! `k`-th nearest reference row exceeds the 0.95-quantile of the same
//! leave-one-out distance, measured on the newest chunk of the window. On
//! data from the reference distribution about 5% of rows are outliers; a
//! drift or a new class raises the rate.
//!
//! A chunk is flagged when its outlier rate exceeds `rho_0 * (1 + 3 * s)`,
//! with `rho_0 = 0.05` and `s` the sensitivity hyperparameter, so lower `s`
//! detects more. A rate above the most sensitive threshold in range starts a
//! new window.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{check_nonempty, ChunkDetector};
use crate::error::Result;

pub const NEIGHBOURS: usize = 5;
pub const RADIUS_QUANTILE: f64 = 0.95;
pub const BASE_RATE: f64 = 1.0 - RADIUS_QUANTILE;
const SENSITIVITY_GAIN: f64 = 3.0;

pub(super) fn fires(sensitivity: f64, outlier_rate: f64) -> bool {
    outlier_rate > BASE_RATE * (1.0 + SENSITIVITY_GAIN * sensitivity)
}

/// Reference window length in chunks.
pub const WINDOW: usize = 5;
/// Outlier rate above which the reference window restarts: the detection
/// threshold of the most sensitive `sensitivity` in range.
pub const RESTART: f64 = BASE_RATE * (1.0 + SENSITIVITY_GAIN * 0.3);

#[derive(Clone, Debug)]
pub struct OneClassOutliers {
    neighbours: usize,
    quantile: f64,
    window: usize,
    chunks: std::collections::VecDeque<Array2<f64>>,
    model: Option<LevelSet>,
}

impl Default for OneClassOutliers {
    fn default() -> Self {
        Self::with_params(NEIGHBOURS, RADIUS_QUANTILE)
    }
}

#[derive(Clone, Debug)]
struct LevelSet {
    mean: Array1<f64>,
    scale: Array1<f64>,
    reference: Array2<f64>,
    radius: f64,
    k: usize,
}

/// Distance to the `k`-th nearest reference row, optionally skipping one row.
fn kth_distance(reference: &Array2<f64>, query: ArrayView1<f64>, k: usize, skip: Option<usize>, best: &mut Vec<f64>) -> f64 {
    let d = reference.ncols();
    let flat = reference.as_slice().expect("standard layout");
    let q: Vec<f64> = query.to_vec();
    let k = k.max(1);
    // ascending k smallest squared distances seen so far
    best.clear();
    for (j, row) in flat.chunks_exact(d).enumerate() {
        if Some(j) == skip {
            continue;
        }
        let mut s = 0.0;
        for (a, b) in row.iter().zip(&q) {
            let t = a - b;
            s += t * t;
        }
        if best.len() < k {
            let at = best.partition_point(|&v| v <= s);
            best.insert(at, s);
        } else if s < best[k - 1] {
            best.pop();
            let at = best.partition_point(|&v| v <= s);
            best.insert(at, s);
        }
    }
    best.last().map_or(0.0, |v| v.sqrt())
}

impl LevelSet {
    /// Level set of the rows of `x`; the radius is calibrated with
    /// leave-one-out distances of rows `calibrate_from..`.
    fn fit(x: ArrayView2<f64>, calibrate_from: usize, k: usize, quantile: f64) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let reference = ((&x - &mean) / &scale).as_standard_layout().into_owned();
        let mut buf = Vec::with_capacity(reference.nrows());
        let mut loo: Vec<f64> = (calibrate_from.min(reference.nrows() - 1)..reference.nrows())
            .map(|i| kth_distance(&reference, reference.row(i), k, Some(i), &mut buf))
            .collect();
        loo.sort_by(f64::total_cmp);
        let pos = ((loo.len() as f64 * quantile).ceil() as usize).clamp(1, loo.len()) - 1;
        Self { radius: loo[pos], mean, scale, reference, k }
    }

    fn outlier_rate(&self, x: ArrayView2<f64>) -> f64 {
        let z = (&x - &self.mean) / &self.scale;
        let mut buf = Vec::with_capacity(self.reference.nrows());
        let outliers = z
            .outer_iter()
            .filter(|row| kth_distance(&self.reference, *row, self.k, None, &mut buf) > self.radius)
            .count();
        outliers as f64 / x.nrows() as f64
    }
}

impl OneClassOutliers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_params(neighbours: usize, quantile: f64) -> Self {
        Self { neighbours, quantile, window: WINDOW, chunks: Default::default(), model: None }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    /// Appends `x` to the reference window, or restarts the window from `x`,
    /// and refits the level set.
    fn push_reference(&mut self, x: ArrayView2<f64>, restart: bool) {
        if restart {
            self.chunks.clear();
        }
        self.chunks.push_back(x.to_owned());
        while self.chunks.len() > self.window {
            self.chunks.pop_front();
        }
        let views: Vec<ArrayView2<f64>> = self.chunks.iter().map(|a| a.view()).collect();
        let pooled = ndarray::concatenate(Axis(0), &views).expect("equal widths");
        // the newest chunk sits at the end of the pool and calibrates the radius
        let newest = pooled.nrows() - x.nrows();
        self.model = Some(LevelSet::fit(pooled.view(), newest, self.neighbours, self.quantile));
    }

    /// Outlier rate of `x` under the current one-class model.
    pub fn outlier_rate(&self, x: ArrayView2<f64>) -> Option<f64> {
        self.model.as_ref().map(|m| m.outlier_rate(x))
    }
}

impl ChunkDetector for OneClassOutliers {
    fn init(&mut self, features: ArrayView2<f64>, _labels: &[usize]) -> Result<()> {
        check_nonempty(features)?;
        self.push_reference(features, true);
        Ok(())
    }

    fn observe(&mut self, features: ArrayView2<f64>) -> Result<f64> {
        check_nonempty(features)?;
        let rate = self.outlier_rate(features).unwrap_or(0.0);
        self.push_reference(features, rate > RESTART);
        Ok(rate)
    }
}
