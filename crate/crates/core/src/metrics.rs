//! Open-set scores built on balanced accuracy, and confusion matrices.
//!
//! Every score is `None` when the rows it is defined on are absent from the
//! chunk (no unknown rows for the outer score, no known rows for the inner
//! and halfpoint scores). Classes with no true rows are left out of the
//! balanced average.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// A ground-truth or predicted label in an open-set problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpenLabel {
    Known(usize),
    Unknown,
}

impl OpenLabel {
    pub fn is_unknown(self) -> bool {
        matches!(self, OpenLabel::Unknown)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OsrScores {
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub halfpoint: Option<f64>,
    pub overall: Option<f64>,
}

/// Mean per-class recall over the classes of `label_set` that occur in `truth`.
pub fn balanced_accuracy<L: PartialEq>(truth: &[L], pred: &[L], label_set: &[L]) -> Option<f64> {
    assert_eq!(truth.len(), pred.len(), "truth and prediction lengths differ");
    let mut sum = 0.0;
    let mut classes = 0usize;
    for class in label_set {
        let (mut support, mut hits) = (0usize, 0usize);
        for (t, p) in truth.iter().zip(pred) {
            if t == class {
                support += 1;
                hits += usize::from(p == class);
            }
        }
        if support > 0 {
            sum += hits as f64 / support as f64;
            classes += 1;
        }
    }
    (classes > 0).then(|| sum / classes as f64)
}

fn known_labels(truth: &[OpenLabel]) -> Vec<OpenLabel> {
    let mut set: Vec<OpenLabel> = truth.iter().copied().filter(|l| !l.is_unknown()).collect();
    set.sort_unstable();
    set.dedup();
    set
}

/// Binary known-versus-unknown recognition.
pub fn outer_score(truth: &[OpenLabel], pred: &[OpenLabel]) -> Option<f64> {
    let t: Vec<bool> = truth.iter().map(|l| l.is_unknown()).collect();
    let p: Vec<bool> = pred.iter().map(|l| l.is_unknown()).collect();
    if !(t.contains(&true) && t.contains(&false)) {
        return None;
    }
    balanced_accuracy(&t, &p, &[false, true])
}

/// Closed-set accuracy on known rows; rejected rows fall back to their most
/// supported known class. `supports` has one row per sample.
pub fn inner_score(truth: &[OpenLabel], pred: &[OpenLabel], supports: ArrayView2<f64>) -> Option<f64> {
    assert_eq!(truth.len(), supports.nrows(), "one support row per sample");
    let forced: Vec<OpenLabel> = pred
        .iter()
        .enumerate()
        .map(|(i, &p)| match p {
            OpenLabel::Unknown => OpenLabel::Known(argmax(supports.row(i).iter().copied())),
            known => known,
        })
        .collect();
    let labels = known_labels(truth);
    balanced_accuracy(truth, &forced, &labels)
}

/// Accuracy on known rows where rejecting a known row counts as an error.
pub fn halfpoint_score(truth: &[OpenLabel], pred: &[OpenLabel]) -> Option<f64> {
    let labels = known_labels(truth);
    balanced_accuracy(truth, pred, &labels)
}

/// Balanced accuracy with all unknown rows forming one extra class.
pub fn overall_score(truth: &[OpenLabel], pred: &[OpenLabel]) -> Option<f64> {
    let mut labels = known_labels(truth);
    labels.push(OpenLabel::Unknown);
    balanced_accuracy(truth, pred, &labels)
}

pub fn score_chunk(truth: &[OpenLabel], pred: &[OpenLabel], supports: ArrayView2<f64>) -> OsrScores {
    OsrScores {
        inner: inner_score(truth, pred, supports),
        outer: outer_score(truth, pred),
        halfpoint: halfpoint_score(truth, pred),
        overall: overall_score(truth, pred),
    }
}

/// Rows are true labels, columns predictions; index `n_known` is the unknown
/// class. Known labels at or beyond `n_known` are counted as unknown.
pub fn confusion_matrix(truth: &[OpenLabel], pred: &[OpenLabel], n_known: usize) -> Array2<u64> {
    let idx = |l: OpenLabel| match l {
        OpenLabel::Known(k) if k < n_known => k,
        _ => n_known,
    };
    let mut m = Array2::zeros((n_known + 1, n_known + 1));
    for (&t, &p) in truth.iter().zip(pred) {
        m[[idx(t), idx(p)]] += 1;
    }
    m
}

/// Index of the largest value; the first one on ties.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use OpenLabel::{Known as K, Unknown as U};

    fn no_supports(n: usize) -> Array2<f64> {
        Array2::from_elem((n, 2), 0.5)
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[0, 1, 1], &[0, 1, 1], &[0, 1]), Some(1.0));
        assert_eq!(balanced_accuracy(&[0, 0, 1, 1], &[0, 0, 0, 0], &[0, 1]), Some(0.5));
        let ba = balanced_accuracy(&[0, 0, 1, 1, 1, 2], &[0, 1, 1, 1, 0, 2], &[0, 1, 2]).unwrap();
        assert!((ba - (0.5 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-15);
        assert_eq!(balanced_accuracy::<usize>(&[], &[], &[0, 1]), None);
        // absent classes are dropped, not scored as zero
        assert_eq!(balanced_accuracy(&[0, 0], &[0, 0], &[0, 1, 2]), Some(1.0));
    }

    #[test]
    fn outer_examples() {
        let truth = [K(0), K(1), U, U];
        assert_eq!(outer_score(&truth, &[U; 4]), Some(0.5));
        assert_eq!(outer_score(&truth, &[K(1), K(0), U, U]), Some(1.0));
        assert_eq!(outer_score(&[K(0), K(1)], &[U, U]), None);
        assert_eq!(outer_score(&[U, U], &[U, U]), None);

        let mut t = vec![K(0); 80];
        t.extend([U; 20]);
        let mut p = vec![K(0); 70];
        p.extend([U; 10]);
        p.extend([U; 16]);
        p.extend([K(1); 4]);
        assert!((outer_score(&t, &p).unwrap() - 0.8375).abs() < 1e-15);
    }

    #[test]
    fn inner_examples() {
        let truth = [K(0), K(1), K(1), U];
        let pred = [K(0), K(1), K(0), U];
        let s = no_supports(4);
        assert_eq!(inner_score(&truth, &pred, s.view()), halfpoint_score(&truth, &pred));
        assert_eq!(inner_score(&truth, &pred, s.view()), Some(0.75));

        let sup = array![[0.9, 0.1], [0.2, 0.8], [0.3, 0.7], [0.5, 0.5]];
        assert_eq!(inner_score(&truth, &[U; 4], sup.view()), Some(1.0));
        assert_eq!(inner_score(&[U], &[U], array![[1.0, 0.0]].view()), None);
    }

    /// Six rows, forced choice worked by hand.
    #[test]
    fn inner_six_rows() {
        let truth = [K(0), K(0), K(1), K(2), K(2), U];
        let pred = [U, K(1), U, K(2), U, K(0)];
        let sup = array![
            [0.5, 0.3, 0.2],
            [0.1, 0.8, 0.1],
            [0.6, 0.3, 0.1],
            [0.1, 0.1, 0.8],
            [0.3, 0.3, 0.4],
            [0.9, 0.05, 0.05],
        ];
        // forced: [0, 1, 0, 2, 2, -]; recalls 1/2, 0, 1
        let s = inner_score(&truth, &pred, sup.view()).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
        // halfpoint: recalls 0, 0, 1/2
        assert!((halfpoint_score(&truth, &pred).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn halfpoint_examples() {
        assert_eq!(halfpoint_score(&[K(0), K(1)], &[K(0), K(1)]), Some(1.0));
        assert_eq!(halfpoint_score(&[K(0), K(1), U], &[U, U, U]), Some(0.0));
        let mut t = vec![K(0); 10];
        t.extend([K(1); 5]);
        let mut p = vec![K(0); 8];
        p.extend([U, K(1)]);
        p.extend([K(1); 5]);
        assert!((halfpoint_score(&t, &p).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(halfpoint_score(&[U], &[U]), None);
    }

    #[test]
    fn overall_examples() {
        let truth = [K(0), K(1), U, U];
        assert_eq!(overall_score(&truth, &truth), Some(1.0));
        assert_eq!(overall_score(&[], &[]), None);
        // a single known class makes overall coincide with outer
        let t = [K(0), K(0), K(0), U, U];
        let p = [K(0), U, K(0), U, K(0)];
        assert_eq!(overall_score(&t, &p), outer_score(&t, &p));
    }

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&[K(0), K(1), U], &[K(0), K(1), U], 2);
        assert_eq!(m, Array2::from_diag(&ndarray::arr1(&[1u64, 1, 1])));
        let m = confusion_matrix(&[K(0)], &[U], 2);
        assert_eq!(m[[0, 2]], 1);
        assert_eq!(m.sum(), 1);
    }

    fn label(code: u8, n_known: u8) -> OpenLabel {
        if code >= n_known {
            U
        } else {
            K(code as usize)
        }
    }

    proptest! {
        #[test]
        fn scores_bounded_and_order_free(
            rows in prop::collection::vec((0u8..4, 0u8..4, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..30),
            rot in 0usize..30,
        ) {
            let truth: Vec<_> = rows.iter().map(|r| label(r.0, 3)).collect();
            let pred: Vec<_> = rows.iter().map(|r| label(r.1, 3)).collect();
            let sup = Array2::from_shape_fn((rows.len(), 3), |(i, j)| [rows[i].2, rows[i].3, rows[i].4][j]);
            let a = score_chunk(&truth, &pred, sup.view());
            for v in [a.inner, a.outer, a.halfpoint, a.overall].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let k = rot % rows.len();
            let mut t2 = truth.clone();
            let mut p2 = pred.clone();
            t2.rotate_left(k);
            p2.rotate_left(k);
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.rotate_left(k);
            let s2 = sup.select(ndarray::Axis(0), &order);
            let b = score_chunk(&t2, &p2, s2.view());
            let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
                (Some(x), Some(y)) => (x - y).abs() < 1e-12,
                (None, None) => true,
                _ => false,
            };
            prop_assert!(close(a.inner, b.inner) && close(a.outer, b.outer));
            prop_assert!(close(a.halfpoint, b.halfpoint) && close(a.overall, b.overall));

            // a rejected known row can only gain under forced choice
            if let (Some(h), Some(i)) = (a.halfpoint, a.inner) {
                prop_assert!(h <= i + 1e-12);
            }
            let m = confusion_matrix(&truth, &pred, 3);
            prop_assert_eq!(m.sum() as usize, rows.len());
        }
    }

    #[test]
    fn overall_equals_inner_without_unknowns() {
        let truth = [K(0), K(1), K(1), K(2)];
        let pred = [K(0), K(0), K(1), K(2)];
        let s = no_supports(4);
        assert_eq!(overall_score(&truth, &pred), inner_score(&truth, &pred, s.view()));
    }
}
