//! CART classification tree: Gini impurity, midpoint thresholds, grown
//! until leaves are pure (or fewer than `min_samples_split` samples remain).

use crate::stream::{
    check_dim, validate_batch, BatchClassifier, Classifier, Instance, ModelError, Prediction,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    #[default]
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            max_depth: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        counts: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    config: CartConfig,
    n_features: usize,
    n_classes: usize,
    nodes: Vec<Node>,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    /// Sum of child impurities weighted by child size.
    weighted_impurity: f64,
}

/// `n * gini` for a count vector summing to `n`.
fn scaled_gini(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    n - counts.iter().map(|c| c * c).sum::<f64>() / n
}

impl DecisionTree {
    pub fn new(n_features: usize, n_classes: usize, config: CartConfig) -> Self {
        Self {
            config,
            n_features,
            n_classes,
            nodes: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(&self.nodes, 0)
        }
    }

    /// `(feature, threshold)` of every split node in construction order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split {
                    feature, threshold, ..
                } => Some((*feature, *threshold)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Grows the tree on `data[indices]`; indices may repeat (bootstrap).
    pub(crate) fn fit_indices(&mut self, data: &[Instance], indices: Vec<usize>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = Vec::new();
        // (index set, depth, slot in `nodes`)
        let mut stack = vec![(indices, 0usize, 0usize)];
        nodes.push(Node::Leaf { counts: Vec::new() });
        while let Some((idx, depth, slot)) = stack.pop() {
            let mut counts = vec![0.0; self.n_classes];
            for &i in &idx {
                counts[data[i].y] += 1.0;
            }
            let n = idx.len();
            let impure = counts.iter().filter(|&&c| c > 0.0).count() > 1;
            let depth_ok = self.config.max_depth.is_none_or(|m| depth < m);
            let split = if impure && n >= self.config.min_samples_split && depth_ok {
                self.best_split(data, &idx, &counts, &mut rng)
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf { counts },
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx
                        .into_iter()
                        .partition(|&i| data[i].x[s.feature] <= s.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    // right pushed first so the left subtree is built first
                    stack.push((r, depth + 1, right));
                    stack.push((l, depth + 1, left));
                }
            }
        }
        self.nodes = nodes;
    }

    fn best_split(
        &self,
        data: &[Instance],
        idx: &[usize],
        parent_counts: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Option<SplitCandidate> {
        let mut features: Vec<usize> = (0..self.n_features).collect();
        let k = self.config.max_features.resolve(self.n_features);
        if k < self.n_features {
            features.shuffle(rng);
        }
        let n = idx.len() as f64;
        let mut best: Option<SplitCandidate> = None;
        let mut evaluated = 0;
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for &f in &features {
            if evaluated >= k && best.is_some() {
                break;
            }
            column.clear();
            column.extend(idx.iter().map(|&i| (data[i].x[f], data[i].y)));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            if column[0].0 == column[column.len() - 1].0 {
                // constant features do not count towards the sample size
                continue;
            }
            evaluated += 1;
            let mut left = vec![0.0; self.n_classes];
            let mut right = parent_counts.to_vec();
            for pos in 0..column.len() - 1 {
                let (v, y) = column[pos];
                left[y] += 1.0;
                right[y] -= 1.0;
                let next = column[pos + 1].0;
                if v == next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let score = scaled_gini(&left, nl) + scaled_gini(&right, n - nl);
                if best.as_ref().is_none_or(|b| score < b.weighted_impurity) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold,
                        weighted_impurity: score,
                    });
                }
            }
        }
        best
    }

    fn leaf_counts(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        if self.nodes.is_empty() {
            return Ok(Prediction::untrained(self.n_classes));
        }
        Ok(Prediction::from_weights(self.leaf_counts(x).to_vec()))
    }
}

impl BatchClassifier for DecisionTree {
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError> {
        validate_batch(batch, self.n_features, self.n_classes)?;
        let seed = self.config.seed;
        self.fit_indices(batch, (0..batch.len()).collect(), seed);
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn BatchClassifier> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(x: Vec<f64>, y: usize) -> Instance {
        Instance::new(x, y, 0)
    }

    #[test]
    fn separable_one_dimensional() {
        let batch = vec![
            inst(vec![0.0], 0),
            inst(vec![1.0], 0),
            inst(vec![10.0], 1),
            inst(vec![11.0], 1),
        ];
        let mut t = DecisionTree::new(1, 2, CartConfig::default());
        t.fit(&batch).unwrap();
        let splits = t.splits();
        assert_eq!(splits.len(), 1);
        assert!(splits[0].1 > 1.0 && splits[0].1 < 10.0);
        assert_eq!(splits[0].1, 5.5);
        for b in &batch {
            assert_eq!(t.predict(&b.x).unwrap().label, b.y);
        }
    }

    #[test]
    fn xor_is_fit_exactly() {
        let batch = vec![
            inst(vec![0.0, 0.0], 0),
            inst(vec![1.0, 1.0], 0),
            inst(vec![0.0, 1.0], 1),
            inst(vec![1.0, 0.0], 1),
        ];
        let mut t = DecisionTree::new(2, 2, CartConfig::default());
        t.fit(&batch).unwrap();
        for b in &batch {
            assert_eq!(t.predict(&b.x).unwrap().label, b.y);
        }
    }

    #[test]
    fn single_class_batch_is_a_leaf() {
        let batch = vec![inst(vec![0.0], 1), inst(vec![5.0], 1)];
        let mut t = DecisionTree::new(1, 3, CartConfig::default());
        t.fit(&batch).unwrap();
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.predict(&[100.0]).unwrap().label, 1);
    }

    #[test]
    fn untrained_and_empty() {
        let mut t = DecisionTree::new(1, 2, CartConfig::default());
        assert_eq!(t.predict(&[3.0]).unwrap().label, 0);
        assert_eq!(t.fit(&[]), Err(ModelError::EmptyBatch));
    }

    #[test]
    fn conflicting_duplicates_stop_growth() {
        let batch = vec![inst(vec![1.0], 0), inst(vec![1.0], 1), inst(vec![1.0], 1)];
        let mut t = DecisionTree::new(1, 2, CartConfig::default());
        t.fit(&batch).unwrap();
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.predict(&[1.0]).unwrap().label, 1);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(10), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
        assert_eq!(MaxFeatures::Count(20).resolve(7), 7);
    }
}
