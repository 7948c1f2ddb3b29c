//! Margin density detector.
//!
//! A linear hinge-loss classifier separates the majority class of the first
//! chunk from the rest. Rows fall into four regions by their decision value
//! `f`: beyond the margin on either side, or inside the band `|f| <= m` on
//! either side. The band half-width `m` is the median `|f|` over the
//! reference window, so each margin side holds about a quarter of the
//! reference rows. The statistic is the summed absolute change of the four
//! region densities between the incoming chunk and the reference; a change
//! larger than `sigma` flags a drift.
//!
//! After each chunk the classifier is refit on the previous chunk with its own
//! predictions as pseudo-labels, and band and densities are re-measured on
//! the reference window, which pools the last [`WINDOW`] chunks and restarts
//! when the statistic crosses the most sensitive threshold in range.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::{check_nonempty, ChunkDetector};
use crate::error::{Error, Result};
use crate::seed::StreamRng;

const REGULARIZATION: f64 = 0.01;
const EPOCHS: usize = 10;
const STEP_OFFSET: f64 = 100.0;
/// Reference window length in chunks.
pub const WINDOW: usize = 10;
/// Deviation above which the reference window restarts: the detection
/// threshold of the most sensitive `sigma` in range.
pub const RESTART: f64 = 0.1;

pub(super) fn fires(sigma: f64, deviation: f64) -> bool {
    deviation > sigma
}

/// Linear classifier on standardized features.
#[derive(Clone, Debug)]
pub struct MarginModel {
    mean: Array1<f64>,
    scale: Array1<f64>,
    weights: Array1<f64>,
    bias: f64,
}

impl MarginModel {
    /// Fits a soft-margin linear separator of `positive` rows against the rest
    /// with averaged stochastic subgradient descent.
    pub fn fit(x: ArrayView2<f64>, positive: &[bool], regularization: f64, rng: &mut StreamRng) -> Result<Self> {
        check_nonempty(x)?;
        if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
            return Err(Error::SingleClass);
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        let z = (&x - &mean) / &scale;
        let d = z.ncols();
        let mut w = Array1::<f64>::zeros(d);
        let mut b = 0.0;
        let mut w_avg = Array1::<f64>::zeros(d);
        let mut b_avg = 0.0;
        let mut order: Vec<usize> = (0..z.nrows()).collect();
        let mut step = 0.0;
        for epoch in 0..EPOCHS {
            order.shuffle(rng);
            for &i in &order {
                step += 1.0;
                let eta = 1.0 / (regularization * (step + STEP_OFFSET));
                let y = if positive[i] { 1.0 } else { -1.0 };
                let row = z.row(i);
                let margin = y * (w.dot(&row) + b);
                w *= 1.0 - eta * regularization;
                b *= 1.0 - eta * regularization;
                if margin < 1.0 {
                    w.scaled_add(eta * y, &row);
                    b += eta * y;
                }
                if epoch == EPOCHS - 1 {
                    w_avg += &w;
                    b_avg += b;
                }
            }
        }
        let n = z.nrows() as f64;
        Ok(Self { mean, scale, weights: w_avg / n, bias: b_avg / n })
    }

    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        ((&x - &self.mean) / &self.scale).dot(&self.weights) + self.bias
    }

    /// Share of rows with `|w.x + b| <= band`.
    pub fn margin_density(&self, x: ArrayView2<f64>, band: f64) -> f64 {
        let f = self.decision(x);
        f.iter().filter(|v| v.abs() <= band).count() as f64 / f.len() as f64
    }

    /// Median of `|w.x + b|` over `x`.
    pub fn median_margin(&self, x: ArrayView2<f64>) -> f64 {
        let mut f: Vec<f64> = self.decision(x).iter().map(|v| v.abs()).collect();
        let mid = f.len() / 2;
        *f.select_nth_unstable_by(mid, f64::total_cmp).1
    }

    /// Shares of rows in the four margin regions `f < -band`, `-band <= f < 0`,
    /// `0 <= f <= band` and `f > band`.
    pub fn occupancy(&self, x: ArrayView2<f64>, band: f64) -> [f64; 4] {
        let f = self.decision(x);
        let mut counts = [0usize; 4];
        for &v in f.iter() {
            let bin = if v < -band {
                0
            } else if v < 0.0 {
                1
            } else if v <= band {
                2
            } else {
                3
            };
            counts[bin] += 1;
        }
        counts.map(|c| c as f64 / f.len() as f64)
    }
}

/// Summed absolute change of the region densities.
fn density_change(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub struct MarginDensity {
    regularization: f64,
    rng: StreamRng,
    model: Option<MarginModel>,
    band: f64,
    baseline: [f64; 4],
    window: usize,
    reference: std::collections::VecDeque<Array2<f64>>,
}

impl MarginDensity {
    pub fn new(seed: u64) -> Self {
        Self::with_regularization(seed, REGULARIZATION)
    }

    pub fn with_regularization(seed: u64, regularization: f64) -> Self {
        Self { regularization, rng: StreamRng::seed_from_u64(seed), model: None, band: 1.0, baseline: [0.25; 4], window: WINDOW, reference: Default::default() }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }

    /// Appends `x` to the reference window (or restarts it from `x`) and
    /// re-measures band and baseline occupancy with the current model.
    fn push_reference(&mut self, x: ArrayView2<f64>, restart: bool) {
        if restart {
            self.reference.clear();
        }
        self.reference.push_back(x.to_owned());
        while self.reference.len() > self.window {
            self.reference.pop_front();
        }
        let views: Vec<ArrayView2<f64>> = self.reference.iter().map(|a| a.view()).collect();
        let pooled = concatenate(Axis(0), &views).expect("equal widths");
        let model = self.model.as_ref().expect("model present");
        self.band = model.median_margin(pooled.view());
        self.baseline = model.occupancy(pooled.view(), self.band);
    }

    pub fn model(&self) -> Option<&MarginModel> {
        self.model.as_ref()
    }

    pub fn baseline(&self) -> [f64; 4] {
        self.baseline
    }
}

/// Most frequent label, lowest label on ties.
fn majority(labels: &[usize]) -> usize {
    let top = labels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == best).unwrap_or(0)
}

impl ChunkDetector for MarginDensity {
    fn init(&mut self, features: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        check_nonempty(features)?;
        if labels.len() != features.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        let target = majority(labels);
        let positive: Vec<bool> = labels.iter().map(|&l| l == target).collect();
        self.model = Some(MarginModel::fit(features, &positive, self.regularization, &mut self.rng)?);
        self.push_reference(features, true);
        Ok(())
    }

    fn observe(&mut self, features: ArrayView2<f64>) -> Result<f64> {
        check_nonempty(features)?;
        let model = self.model.as_ref().ok_or(Error::NotFitted)?;
        let deviation = density_change(&model.occupancy(features, self.band), &self.baseline);

        let previous = self.reference.back().expect("set with the model");
        let pseudo: Vec<bool> = model.decision(previous.view()).iter().map(|&v| v >= 0.0).collect();
        // a one-sided pseudo-labelling cannot be refit; keep the current model
        if let Ok(refit) = MarginModel::fit(previous.view(), &pseudo, self.regularization, &mut self.rng) {
            self.model = Some(refit);
        }
        self.push_reference(features, deviation > RESTART);
        Ok(deviation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn two_blobs(rows: usize, gap: f64, rng: &mut StreamRng) -> (Array2<f64>, Vec<usize>) {
        let labels: Vec<usize> = (0..rows).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((rows, 2), |(i, j)| {
            let z: f64 = StandardNormal.sample(rng);
            z + if j == 0 { gap * labels[i] as f64 } else { 0.0 }
        });
        (x, labels)
    }

    #[test]
    fn single_class_cannot_be_fit() {
        let mut d = MarginDensity::new(0);
        let x = Array2::<f64>::zeros((4, 2));
        assert!(matches!(d.init(x.view(), &[1, 1, 1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn separates_blobs() {
        let mut rng = StreamRng::seed_from_u64(1);
        let (x, y) = two_blobs(400, 4.0, &mut rng);
        let pos: Vec<bool> = y.iter().map(|&l| l == 0).collect();
        let m = MarginModel::fit(x.view(), &pos, REGULARIZATION, &mut rng).unwrap();
        let f = m.decision(x.view());
        let acc = f.iter().zip(&pos).filter(|(v, &p)| (**v >= 0.0) == p).count() as f64 / 400.0;
        assert!(acc > 0.95, "{acc}");
        let md = m.margin_density(x.view(), 1.0);
        assert!(md > 0.0 && md < 0.6, "{md}");
        let half = m.margin_density(x.view(), m.median_margin(x.view()));
        assert!((half - 0.5).abs() < 0.01, "{half}");
    }

    #[test]
    fn unchanged_density_never_fires() {
        assert!(!fires(0.1, 0.0));
        assert!(fires(0.1, 0.2));
        assert!(!fires(0.45, 0.2));
    }

    #[test]
    fn stationary_deviation_is_small() {
        let mut rng = StreamRng::seed_from_u64(2);
        let mut d = MarginDensity::new(7);
        let (x, y) = two_blobs(500, 2.0, &mut rng);
        d.init(x.view(), &y).unwrap();
        let devs: Vec<f64> = (0..100).map(|_| d.observe(two_blobs(500, 2.0, &mut rng).0.view()).unwrap()).collect();
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let worst = devs.iter().copied().fold(0.0, f64::max);
        assert!(mean < 0.1, "{mean}");
        assert!(!fires(0.3, worst), "{worst}");
    }

    #[test]
    fn one_sided_newcomers_fire() {
        let mut rng = StreamRng::seed_from_u64(3);
        let mut d = MarginDensity::new(8);
        let (x, y) = two_blobs(500, 2.0, &mut rng);
        d.init(x.view(), &y).unwrap();
        let (mut x, _) = two_blobs(500, 2.0, &mut rng);
        // half the chunk replaced by a far cluster on one side
        x.slice_mut(ndarray::s![..250, 0]).fill(8.0);
        assert!(fires(0.45, d.observe(x.view()).unwrap()));
    }

    #[test]
    fn majority_breaks_ties_low() {
        assert_eq!(majority(&[1, 0, 1, 0]), 0);
        assert_eq!(majority(&[2, 1, 2]), 2);
    }
}
