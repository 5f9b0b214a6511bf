use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("no instances scored")]
    Empty,
}

/// `K x K` counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            k: n_classes,
            counts: vec![0; n_classes * n_classes],
            total: 0,
        }
    }

    pub fn from_pairs(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cm = Self::new(n_classes);
        for (y, p) in pairs {
            cm.add(y, p);
        }
        cm
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.k + predicted] += 1;
        self.total += 1;
    }

    pub fn remove(&mut self, truth: usize, predicted: usize) {
        let c = &mut self.counts[truth * self.k + predicted];
        debug_assert!(*c > 0, "removing an absent record");
        *c -= 1;
        self.total -= 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn accuracy(&self) -> Result<f64, MetricError> {
        if self.total == 0 {
            return Err(MetricError::Empty);
        }
        let hits: u64 = (0..self.k).map(|c| self.get(c, c)).sum();
        Ok(hits as f64 / self.total as f64)
    }

    /// Unweighted mean of per-class F1. A class with `P + R = 0` scores 0;
    /// classes that appear neither in the truth nor in the predictions are
    /// left out of the mean.
    pub fn f1_macro(&self) -> Result<f64, MetricError> {
        if self.total == 0 {
            return Err(MetricError::Empty);
        }
        let k = self.k;
        let mut sum = 0.0;
        let mut present = 0usize;
        for c in 0..k {
            let tp = self.get(c, c) as f64;
            let actual: u64 = (0..k).map(|p| self.get(c, p)).sum();
            let predicted: u64 = (0..k).map(|t| self.get(t, c)).sum();
            if actual == 0 && predicted == 0 {
                continue;
            }
            present += 1;
            // 2PR / (P + R) = 2 tp / (actual + predicted)
            sum += 2.0 * tp / (actual + predicted) as f64;
        }
        Ok(sum / present as f64)
    }
}

pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    cm.f1_macro()
}

/// Confusion matrix over the most recent `capacity` records.
#[derive(Debug, Clone)]
pub struct WindowedConfusion {
    capacity: usize,
    records: VecDeque<(usize, usize)>,
    cm: ConfusionMatrix,
}

impl WindowedConfusion {
    pub fn new(n_classes: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        Self {
            capacity,
            records: VecDeque::with_capacity(capacity),
            cm: ConfusionMatrix::new(n_classes),
        }
    }

    pub fn push(&mut self, truth: usize, predicted: usize) {
        if self.records.len() == self.capacity {
            let (t, p) = self.records.pop_front().expect("non-empty at capacity");
            self.cm.remove(t, p);
        }
        self.records.push_back((truth, predicted));
        self.cm.add(truth, predicted);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.records.iter().copied()
    }

    pub fn matrix(&self) -> &ConfusionMatrix {
        &self.cm
    }

    /// F1-macro over the window; 0 while empty.
    pub fn f1_macro(&self) -> f64 {
        self.cm.f1_macro().unwrap_or(0.0)
    }
}

/// Test-then-train bookkeeping: a cumulative matrix plus a sliding window.
#[derive(Debug, Clone)]
pub struct Prequential {
    cumulative: ConfusionMatrix,
    window: WindowedConfusion,
}

impl Prequential {
    pub fn new(n_classes: usize, window: usize) -> Self {
        Self {
            cumulative: ConfusionMatrix::new(n_classes),
            window: WindowedConfusion::new(n_classes, window),
        }
    }

    pub fn update(&mut self, truth: usize, predicted: usize) {
        self.cumulative.add(truth, predicted);
        self.window.push(truth, predicted);
    }

    pub fn n_seen(&self) -> u64 {
        self.cumulative.total()
    }

    pub fn cumulative(&self) -> &ConfusionMatrix {
        &self.cumulative
    }

    pub fn window(&self) -> &WindowedConfusion {
        &self.window
    }

    pub fn cumulative_f1(&self) -> f64 {
        self.cumulative.f1_macro().unwrap_or(0.0)
    }

    pub fn windowed_f1(&self) -> f64 {
        self.window.f1_macro()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Number of instances scored when the point was taken.
    pub seq: u64,
    pub windowed_f1: f64,
    pub cumulative_f1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        let cm = ConfusionMatrix::from_pairs(2, [(0, 0), (1, 1)]);
        assert_eq!(cm.f1_macro(), Ok(1.0));
        let cm = ConfusionMatrix::from_pairs(2, [(0, 0), (0, 1), (1, 1), (1, 1)]);
        assert!((cm.f1_macro().unwrap() - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
        let cm = ConfusionMatrix::from_pairs(2, [(0, 0), (0, 0), (1, 0), (1, 0)]);
        assert!((cm.f1_macro().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ConfusionMatrix::new(3).f1_macro(), Err(MetricError::Empty));
    }

    #[test]
    fn absent_classes_are_excluded() {
        let cm = ConfusionMatrix::from_pairs(5, [(0, 0), (1, 1)]);
        assert_eq!(cm.f1_macro(), Ok(1.0));
    }

    #[test]
    fn window_evicts_oldest() {
        let mut p = Prequential::new(2, 2);
        p.update(0, 1);
        p.update(0, 0);
        p.update(1, 1);
        assert_eq!(p.window().records().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert_eq!(p.windowed_f1(), 1.0);
        assert_eq!(p.n_seen(), 3);
    }

    proptest! {
        #[test]
        fn windowed_matches_rebuild(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200),
            w in 1usize..30,
        ) {
            let mut p = Prequential::new(4, w);
            for (i, &(y, q)) in pairs.iter().enumerate() {
                p.update(y, q);
                let start = (i + 1).saturating_sub(w);
                let fresh = ConfusionMatrix::from_pairs(4, pairs[start..=i].iter().copied());
                prop_assert_eq!(p.window().matrix(), &fresh);
                let f = p.windowed_f1();
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }

        #[test]
        fn f1_is_invariant_to_relabeling(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..100),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let a = ConfusionMatrix::from_pairs(4, pairs.iter().copied());
            let b = ConfusionMatrix::from_pairs(4, pairs.iter().map(|&(y, q)| (perm[y], perm[q])));
            prop_assert!((a.f1_macro().unwrap() - b.f1_macro().unwrap()).abs() < 1e-12);
        }
    }
}
