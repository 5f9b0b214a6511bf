//! Hoeffding tree with naive Bayes leaves.
//!
//! Numeric attributes are summarised per leaf by class-conditional Gaussian
//! moments. Split candidates are quantiles of the pooled Gaussian of each
//! feature; child class counts are estimated from the class-conditional
//! CDFs. Splits are binary (`x <= threshold` goes left).

use super::gnb::{gaussian_log_joint, posterior, variance_floor};
use super::majority::majority_of_counts;
use super::moments::RunningMoments;
use crate::stattests::special::{normal_cdf, normal_quantile};
use crate::stream::{check_class, check_dim, Classifier, ModelError, OnlineClassifier, Prediction};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoeffdingConfig {
    pub grace_period: u64,
    pub delta: f64,
    pub tie_threshold: f64,
    pub nb_threshold: u64,
    pub n_split_candidates: usize,
}

impl Default for HoeffdingConfig {
    fn default() -> Self {
        Self {
            grace_period: 100,
            delta: 0.01,
            tie_threshold: 0.05,
            nb_threshold: 10,
            n_split_candidates: 10,
        }
    }
}

/// `sqrt(R^2 ln(1/delta) / (2n))`.
pub fn hoeffding_bound(range: f64, delta: f64, n: u64) -> f64 {
    (range * range * (1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

fn entropy(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    if n <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

fn info_gain(parent: &[f64], left: &[f64], right: &[f64]) -> f64 {
    let nl: f64 = left.iter().sum();
    let nr: f64 = right.iter().sum();
    let n = nl + nr;
    if n <= 0.0 {
        return 0.0;
    }
    entropy(parent) - (nl * entropy(left) + nr * entropy(right)) / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSuggestion {
    pub feature: usize,
    pub threshold: f64,
    pub merit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitDecision {
    Split {
        best: SplitSuggestion,
        second_merit: f64,
        epsilon: f64,
    },
    NoSplit {
        best_merit: f64,
        second_merit: f64,
        epsilon: f64,
    },
}

impl SplitDecision {
    pub fn is_split(&self) -> bool {
        matches!(self, SplitDecision::Split { .. })
    }
}

/// Sufficient statistics kept at a leaf.
#[derive(Debug, Clone)]
pub struct HoeffdingNodeStats {
    n_features: usize,
    class_counts: Vec<f64>,
    moments: Vec<RunningMoments>,
    /// Parent's class counts, used while this leaf is still empty.
    fallback: Vec<f64>,
    seen_since_check: u64,
}

impl HoeffdingNodeStats {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            class_counts: vec![0.0; n_classes],
            moments: vec![RunningMoments::new(); n_features * n_classes],
            fallback: vec![0.0; n_classes],
            seen_since_check: 0,
        }
    }

    pub fn observe(&mut self, x: &[f64], y: usize) {
        self.class_counts[y] += 1.0;
        let d = self.n_features;
        for (j, &v) in x.iter().enumerate() {
            self.moments[y * d + j].push(v);
        }
        self.seen_since_check += 1;
    }

    pub fn total(&self) -> f64 {
        self.class_counts.iter().sum()
    }

    pub fn class_counts(&self) -> &[f64] {
        &self.class_counts
    }

    pub fn seen_since_check(&self) -> u64 {
        self.seen_since_check
    }

    fn is_pure(&self) -> bool {
        self.class_counts.iter().filter(|&&c| c > 0.0).count() < 2
    }

    fn pooled(&self, feature: usize) -> RunningMoments {
        let d = self.n_features;
        let mut out = RunningMoments::new();
        for c in 0..self.class_counts.len() {
            let m = &self.moments[c * d + feature];
            if m.count == 0 {
                continue;
            }
            // Chan et al. pairwise combination
            let n = out.count + m.count;
            let delta = m.mean - out.mean;
            let mean = out.mean + delta * m.count as f64 / n as f64;
            let m2 = out.m2 + m.m2 + delta * delta * (out.count * m.count) as f64 / n as f64;
            out = RunningMoments {
                count: n,
                mean,
                m2,
            };
        }
        out
    }

    fn split_counts(&self, feature: usize, threshold: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.n_features;
        let mut left = vec![0.0; self.class_counts.len()];
        let mut right = vec![0.0; self.class_counts.len()];
        for (c, &n) in self.class_counts.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            let m = &self.moments[c * d + feature];
            let sd = m.std();
            let frac = if sd > 0.0 {
                normal_cdf((threshold - m.mean) / sd)
            } else if m.mean <= threshold {
                1.0
            } else {
                0.0
            };
            left[c] = n * frac;
            right[c] = n - left[c];
        }
        (left, right)
    }

    fn best_for_feature(&self, feature: usize, n_candidates: usize) -> Option<SplitSuggestion> {
        let pooled = self.pooled(feature);
        let sd = pooled.std();
        if !(sd > 0.0) {
            return None;
        }
        let mut best: Option<SplitSuggestion> = None;
        for i in 1..=n_candidates {
            let q = i as f64 / (n_candidates + 1) as f64;
            let threshold = pooled.mean + sd * normal_quantile(q);
            let (l, r) = self.split_counts(feature, threshold);
            let merit = info_gain(&self.class_counts, &l, &r);
            if best.as_ref().is_none_or(|b| merit > b.merit) {
                best = Some(SplitSuggestion {
                    feature,
                    threshold,
                    merit,
                });
            }
        }
        best
    }

    /// Evaluates every feature and applies the Hoeffding test. Resets the
    /// grace-period counter.
    pub fn attempt_split(&mut self, config: &HoeffdingConfig) -> SplitDecision {
        self.seen_since_check = 0;
        let n = self.total() as u64;
        let observed = self.class_counts.iter().filter(|&&c| c > 0.0).count();
        let range = (observed.max(2) as f64).log2();
        let epsilon = if n == 0 {
            f64::INFINITY
        } else {
            hoeffding_bound(range, config.delta, n)
        };
        if self.is_pure() {
            return SplitDecision::NoSplit {
                best_merit: 0.0,
                second_merit: 0.0,
                epsilon,
            };
        }
        let mut suggestions: Vec<SplitSuggestion> = (0..self.n_features)
            .filter_map(|f| self.best_for_feature(f, config.n_split_candidates))
            .collect();
        // stable: equal merits keep feature order
        suggestions.sort_by(|a, b| b.merit.total_cmp(&a.merit));
        // the "do not split" option has merit 0
        let best_merit = suggestions.first().map_or(0.0, |s| s.merit.max(0.0));
        let second_merit = suggestions.get(1).map_or(0.0, |s| s.merit.max(0.0));
        if best_merit > 0.0
            && (best_merit - second_merit > epsilon || epsilon < config.tie_threshold)
        {
            SplitDecision::Split {
                best: suggestions.swap_remove(0),
                second_merit,
                epsilon,
            }
        } else {
            SplitDecision::NoSplit {
                best_merit,
                second_merit,
                epsilon,
            }
        }
    }

    /// Majority class below `nb_threshold` observations, naive Bayes above.
    pub fn predict(&self, x: &[f64], nb_threshold: u64) -> Prediction {
        let total = self.total();
        if total == 0.0 {
            let mut p = Prediction::from_weights(self.fallback.clone());
            p.label = majority_of_fallback(&self.fallback);
            return p;
        }
        if (total as u64) < nb_threshold {
            return Prediction::from_weights(self.class_counts.clone());
        }
        let counts: Vec<u64> = self.class_counts.iter().map(|&c| c as u64).collect();
        let floors: Vec<f64> = (0..self.n_features)
            .map(|j| variance_floor(self.pooled(j).variance()))
            .collect();
        posterior(&gaussian_log_joint(&counts, &self.moments, &floors, x))
    }
}

fn majority_of_fallback(counts: &[f64]) -> usize {
    let as_int: Vec<u64> = counts.iter().map(|&c| c.round() as u64).collect();
    majority_of_counts(&as_int)
}

#[derive(Debug, Clone)]
enum HtNode {
    Leaf(HoeffdingNodeStats),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct HoeffdingTree {
    config: HoeffdingConfig,
    n_features: usize,
    n_classes: usize,
    nodes: Vec<HtNode>,
}

impl HoeffdingTree {
    pub fn new(n_features: usize, n_classes: usize, config: HoeffdingConfig) -> Self {
        Self {
            config,
            n_features,
            n_classes,
            nodes: vec![HtNode::Leaf(HoeffdingNodeStats::new(n_features, n_classes))],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, HtNode::Leaf(_)))
            .count()
    }

    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                HtNode::Leaf(_) => return i,
                HtNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl Classifier for HoeffdingTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        match &self.nodes[self.leaf_index(x)] {
            HtNode::Leaf(stats) => Ok(stats.predict(x, self.config.nb_threshold)),
            HtNode::Split { .. } => unreachable!("routing ends at a leaf"),
        }
    }
}

impl OnlineClassifier for HoeffdingTree {
    fn learn_one(&mut self, x: &[f64], y: usize) -> Result<(), ModelError> {
        check_dim(self.n_features, x)?;
        check_class(self.n_classes, y)?;
        let idx = self.leaf_index(x);
        let HtNode::Leaf(stats) = &mut self.nodes[idx] else {
            unreachable!("routing ends at a leaf")
        };
        stats.observe(x, y);
        if stats.seen_since_check() < self.config.grace_period {
            return Ok(());
        }
        if let SplitDecision::Split { best, .. } = stats.attempt_split(&self.config) {
            let parent_counts = stats.class_counts().to_vec();
            let mut left = HoeffdingNodeStats::new(self.n_features, self.n_classes);
            let mut right = left.clone();
            left.fallback = parent_counts.clone();
            right.fallback = parent_counts;
            let l = self.nodes.len();
            self.nodes.push(HtNode::Leaf(left));
            self.nodes.push(HtNode::Leaf(right));
            self.nodes[idx] = HtNode::Split {
                feature: best.feature,
                threshold: best.threshold,
                left: l,
                right: l + 1,
            };
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn OnlineClassifier> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        assert!((hoeffding_bound(1.0, 0.05, 100) - 0.122_387).abs() < 1e-6);
        let e100 = hoeffding_bound(1.0, 0.01, 100);
        assert!((hoeffding_bound(1.0, 0.01, 400) - e100 / 2.0).abs() < 1e-15);
        assert_eq!(hoeffding_bound(1.0, 1.0, 10), 0.0);
        assert!((hoeffding_bound(1.0, 0.01, 200) - 0.107_298).abs() < 1e-6);
    }

    #[test]
    fn pure_leaf_never_splits() {
        let mut s = HoeffdingNodeStats::new(1, 2);
        for i in 0..200 {
            s.observe(&[i as f64], 1);
        }
        let d = s.attempt_split(&HoeffdingConfig::default());
        assert_eq!(
            d,
            SplitDecision::NoSplit {
                best_merit: 0.0,
                second_merit: 0.0,
                epsilon: hoeffding_bound(1.0, 0.01, 200)
            }
        );
    }

    #[test]
    fn separating_feature_splits_at_200() {
        let mut s = HoeffdingNodeStats::new(1, 2);
        for i in 0..100 {
            let j = (i % 10) as f64 * 0.1;
            s.observe(&[j], 0);
            s.observe(&[10.0 + j], 1);
        }
        match s.attempt_split(&HoeffdingConfig::default()) {
            SplitDecision::Split {
                best,
                second_merit,
                epsilon,
            } => {
                assert!((best.merit - 1.0).abs() < 1e-9);
                assert_eq!(second_merit, 0.0);
                assert!((epsilon - 0.107_298).abs() < 1e-6);
                assert!(best.threshold > 1.0 && best.threshold < 10.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(s.seen_since_check(), 0);
    }

    #[test]
    fn identical_features_split_only_through_tie_rule() {
        let feed = |s: &mut HoeffdingNodeStats, n: usize| {
            for i in 0..n / 2 {
                let j = (i % 10) as f64 * 0.1;
                s.observe(&[j, j], 0);
                s.observe(&[10.0 + j, 10.0 + j], 1);
            }
        };
        let cfg = HoeffdingConfig::default();
        // smallest n with sqrt(ln(100) / 2n) < 0.05 is 922
        assert!(hoeffding_bound(1.0, 0.01, 921) >= 0.05);
        assert!(hoeffding_bound(1.0, 0.01, 922) < 0.05);
        let mut s = HoeffdingNodeStats::new(2, 2);
        feed(&mut s, 920);
        let d = s.attempt_split(&cfg);
        assert!(!d.is_split(), "{d:?}");
        if let SplitDecision::NoSplit {
            best_merit,
            second_merit,
            ..
        } = d
        {
            assert!((best_merit - second_merit).abs() < 1e-12);
        }
        feed(&mut s, 4);
        assert!(s.attempt_split(&cfg).is_split());
    }

    #[test]
    fn leaf_prediction_modes() {
        let mut s = HoeffdingNodeStats::new(1, 2);
        for v in [5.0, 6.0, 7.0] {
            s.observe(&[v], 0);
        }
        s.observe(&[0.0], 1);
        // below nb_threshold: majority, even though x sits on class 1's point
        assert_eq!(s.predict(&[0.0], 10).label, 0);
        let mut s = HoeffdingNodeStats::new(1, 2);
        for i in 0..25 {
            s.observe(&[i as f64 * 0.01], 0);
            s.observe(&[5.0 + i as f64 * 0.01], 1);
        }
        assert_eq!(s.predict(&[5.1], 10).label, 1);
        assert_eq!(s.predict(&[0.1], 10).label, 0);
        let mut empty = HoeffdingNodeStats::new(1, 3);
        empty.fallback = vec![1.0, 4.0, 2.0];
        assert_eq!(empty.predict(&[0.0], 10).label, 1);
    }

    #[test]
    fn tree_grows_and_learns() {
        let mut t = HoeffdingTree::new(2, 2, HoeffdingConfig::default());
        let mut prev_nodes = t.n_nodes();
        for i in 0..3000u64 {
            let y = (i % 2) as usize;
            let x = [y as f64 * 3.0 + ((i * 37) % 100) as f64 / 100.0, (i % 7) as f64];
            t.learn_one(&x, y).unwrap();
            assert!(t.n_nodes() >= prev_nodes);
            prev_nodes = t.n_nodes();
            assert!(t.n_leaves() as u64 <= (i + 1) / 100 + 1);
        }
        assert!(t.n_nodes() > 1);
        assert_eq!(t.predict(&[0.5, 1.0]).unwrap().label, 0);
        assert_eq!(t.predict(&[3.5, 1.0]).unwrap().label, 1);
    }
}
