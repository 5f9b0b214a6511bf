use super::cart::{CartConfig, DecisionTree, MaxFeatures};
use crate::stream::{
    check_dim, validate_batch, BatchClassifier, Classifier, Instance, ModelError, Prediction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
    /// Build trees on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            seed: 42,
            parallel: true,
        }
    }
}

/// Bagged CART trees with hard majority voting.
#[derive(Debug, Clone)]
pub struct RandomForest {
    config: ForestConfig,
    n_features: usize,
    n_classes: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn new(n_features: usize, n_classes: usize, config: ForestConfig) -> Self {
        Self {
            config,
            n_features,
            n_classes,
            trees: Vec::new(),
        }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    fn grow(&self, batch: &[Instance], seed: u64) -> DecisionTree {
        let cfg = CartConfig {
            max_features: self.config.max_features,
            seed,
            ..CartConfig::default()
        };
        let mut tree = DecisionTree::new(self.n_features, self.n_classes, cfg);
        let n = batch.len();
        let indices = if self.config.bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        tree.fit_indices(batch, indices, seed);
        tree
    }

    /// Assembles a forest from already built trees.
    pub fn from_trees(n_features: usize, n_classes: usize, trees: Vec<DecisionTree>) -> Self {
        Self {
            config: ForestConfig {
                n_trees: trees.len(),
                ..ForestConfig::default()
            },
            n_features,
            n_classes,
            trees,
        }
    }
}

impl Classifier for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        if self.trees.is_empty() {
            return Ok(Prediction::untrained(self.n_classes));
        }
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)?.label] += 1.0;
        }
        Ok(Prediction::from_weights(votes))
    }
}

impl BatchClassifier for RandomForest {
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError> {
        validate_batch(batch, self.n_features, self.n_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let seeds: Vec<u64> = (0..self.config.n_trees).map(|_| rng.random()).collect();
        self.trees = if self.config.parallel {
            seeds.par_iter().map(|&s| self.grow(batch, s)).collect()
        } else {
            seeds.iter().map(|&s| self.grow(batch, s)).collect()
        };
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn BatchClassifier> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize) -> Vec<Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..n)
            .map(|i| {
                let y = i % 2;
                let c = if y == 0 { -1.0 } else { 1.0 };
                let x = vec![
                    c + rng.random_range(-0.9..0.9),
                    rng.random_range(-1.0..1.0),
                    c * 0.5 + rng.random_range(-1.0..1.0),
                ];
                Instance::new(x, y, i as u64)
            })
            .collect()
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let data = blobs(200);
        let mut forest = RandomForest::new(
            3,
            2,
            ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_features: MaxFeatures::All,
                ..ForestConfig::default()
            },
        );
        forest.fit(&data).unwrap();
        let mut tree = DecisionTree::new(3, 2, CartConfig::default());
        tree.fit(&data).unwrap();
        assert_eq!(forest.trees()[0].splits(), tree.splits());
        for i in &blobs(50) {
            assert_eq!(
                forest.predict(&i.x).unwrap().label,
                tree.predict(&i.x).unwrap().label
            );
        }
    }

    #[test]
    fn parallel_and_serial_builds_agree() {
        let data = blobs(300);
        let cfg = ForestConfig {
            n_trees: 12,
            ..ForestConfig::default()
        };
        let mut a = RandomForest::new(3, 2, cfg.clone());
        let mut b = RandomForest::new(
            3,
            2,
            ForestConfig {
                parallel: false,
                ..cfg
            },
        );
        a.fit(&data).unwrap();
        b.fit(&data).unwrap();
        assert_eq!(a.trees(), b.trees());
    }

    #[test]
    fn identical_trees_vote_like_one() {
        let data = blobs(100);
        let mut tree = DecisionTree::new(3, 2, CartConfig::default());
        tree.fit(&data).unwrap();
        let forest = RandomForest::from_trees(3, 2, vec![tree.clone(); 5]);
        for i in &blobs(40) {
            assert_eq!(
                forest.predict(&i.x).unwrap().label,
                tree.predict(&i.x).unwrap().label
            );
        }
    }

    #[test]
    fn forest_training_accuracy_close_to_tree() {
        let data = blobs(400);
        let mut tree = DecisionTree::new(3, 2, CartConfig::default());
        tree.fit(&data).unwrap();
        let mut forest = RandomForest::new(3, 2, ForestConfig::default());
        forest.fit(&data).unwrap();
        let acc = |m: &dyn Classifier| {
            data.iter()
                .filter(|i| m.predict(&i.x).unwrap().label == i.y)
                .count() as f64
                / data.len() as f64
        };
        assert!(acc(&forest) >= acc(&tree) - 0.01);
    }
}
