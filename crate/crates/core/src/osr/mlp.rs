//! Single-hidden-layer perceptron with a masked softmax output.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters of [`MlpModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Rows per gradient step; `None` uses the whole chunk as one batch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 100, learning_rate: 0.01, epochs: 10, batch_size: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Outcome of one [`MlpModel::partial_fit`] call.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitReport {
    pub rows: usize,
    /// Mean cross-entropy on the training rows after each epoch.
    pub losses: Vec<f64>,
    /// Set when there was nothing to train on.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    active_outputs: usize,
    fitted: bool,
}

fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(dist))
}

fn uniform_vector<R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Array1<f64> {
    uniform_matrix(1, len, fan_in, rng).remove_axis(Axis(0))
}

/// Row-wise softmax over all columns of `logits`.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

impl MlpModel {
    /// Weights drawn from `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(n_features: usize, hidden: usize, n_outputs: usize, active_outputs: usize, rng: &mut R) -> Self {
        let w1 = uniform_matrix(n_features, hidden, n_features, rng);
        let b1 = uniform_vector(hidden, n_features, rng);
        let w2 = uniform_matrix(hidden, n_outputs, hidden, rng);
        let b2 = uniform_vector(n_outputs, hidden, rng);
        Self { w1, b1, w2, b2, active_outputs: active_outputs.min(n_outputs), fitted: false }
    }

    pub fn n_features(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.w2.ncols()
    }

    pub fn active_outputs(&self) -> usize {
        self.active_outputs
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Widens the considered outputs to at least `n`; never narrows.
    pub fn activate(&mut self, n: usize) {
        self.active_outputs = self.active_outputs.max(n.min(self.n_outputs()));
    }

    fn check_shape(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "model takes {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations and active logits.
    fn forward(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let pre = x.dot(&self.w1) + &self.b1;
        let h = pre.mapv(|v| v.max(0.0));
        let k = self.active_outputs;
        let logits = h.dot(&self.w2.slice(ndarray::s![.., ..k])) + self.b2.slice(ndarray::s![..k]);
        (pre, logits)
    }

    /// Softmax supports over the active outputs, one row per sample.
    pub fn supports(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_shape(x)?;
        Ok(softmax(self.forward(x).1.view()))
    }

    /// Mean cross-entropy of `labels` (each below `active_outputs`).
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> f64 {
        let p = softmax(self.forward(x).1.view());
        let n = labels.len().max(1) as f64;
        labels.iter().enumerate().map(|(i, &y)| -p[[i, y]].max(f64::MIN_POSITIVE).ln()).sum::<f64>() / n
    }

    /// Analytic gradients of [`loss`](Self::loss). Inactive output columns get
    /// zero gradient.
    pub fn gradients(&self, x: ArrayView2<f64>, labels: &[usize]) -> Gradients {
        let n = labels.len().max(1) as f64;
        let (pre, logits) = self.forward(x);
        let h = pre.mapv(|v| v.max(0.0));
        let mut delta = softmax(logits.view());
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta /= n;
        let k = self.active_outputs;
        let mut w2 = Array2::zeros(self.w2.raw_dim());
        w2.slice_mut(ndarray::s![.., ..k]).assign(&h.t().dot(&delta));
        let mut b2 = Array1::zeros(self.b2.len());
        b2.slice_mut(ndarray::s![..k]).assign(&delta.sum_axis(Axis(0)));
        let mut dh = delta.dot(&self.w2.slice(ndarray::s![.., ..k]).t());
        Zip::from(&mut dh).and(&pre).for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        Gradients { w1: x.t().dot(&dh), b1: dh.sum_axis(Axis(0)), w2, b2 }
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        self.w1.scaled_add(-lr, &g.w1);
        self.b1.scaled_add(-lr, &g.b1);
        self.w2.scaled_add(-lr, &g.w2);
        self.b2.scaled_add(-lr, &g.b2);
    }

    /// Gradient descent on `(x, labels)` for `config.epochs` epochs. Batches
    /// are taken in row order.
    pub fn partial_fit(&mut self, x: ArrayView2<f64>, labels: &[usize], config: &MlpConfig) -> Result<FitReport> {
        self.check_shape(x)?;
        if labels.len() != x.nrows() {
            return Err(Error::ShapeMismatch(format!("{} labels for {} rows", labels.len(), x.nrows())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.active_outputs) {
            return Err(Error::ShapeMismatch(format!(
                "label {bad} outside the {} active outputs",
                self.active_outputs
            )));
        }
        if labels.is_empty() {
            return Ok(FitReport { skipped: true, ..Default::default() });
        }
        let batch = config.batch_size.unwrap_or(labels.len()).clamp(1, labels.len());
        let mut losses = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            for start in (0..labels.len()).step_by(batch) {
                let end = (start + batch).min(labels.len());
                let g = self.gradients(x.slice(ndarray::s![start..end, ..]), &labels[start..end]);
                self.apply(&g, config.learning_rate);
            }
            losses.push(self.loss(x, labels));
        }
        self.fitted = true;
        Ok(FitReport { rows: labels.len(), losses, skipped: false })
    }
}
