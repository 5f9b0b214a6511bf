use crate::stream::{
    check_class, check_dim, validate_batch, BatchClassifier, Classifier, Instance,
    ModelError, OnlineClassifier, Prediction,
};

/// Most frequent label; ties go to the lowest class index, an empty input to
/// class 0.
pub fn majority_class(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> usize {
    let mut counts = vec![0u64; n_classes.max(1)];
    for y in labels {
        if y < counts.len() {
            counts[y] += 1;
        }
    }
    majority_of_counts(&counts)
}

pub fn majority_of_counts(counts: &[u64]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Predicts the most frequent class seen so far.
#[derive(Debug, Clone)]
pub struct MajorityClass {
    n_features: usize,
    counts: Vec<u64>,
}

impl MajorityClass {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            counts: vec![0; n_classes],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl Classifier for MajorityClass {
    fn n_classes(&self) -> usize {
        self.counts.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        let w: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        Ok(Prediction::from_weights(w))
    }
}

impl OnlineClassifier for MajorityClass {
    fn learn_one(&mut self, x: &[f64], y: usize) -> Result<(), ModelError> {
        check_dim(self.n_features, x)?;
        check_class(self.counts.len(), y)?;
        self.counts[y] += 1;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn OnlineClassifier> {
        Box::new(self.clone())
    }
}

impl BatchClassifier for MajorityClass {
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError> {
        validate_batch(batch, self.n_features, self.counts.len())?;
        self.counts.iter_mut().for_each(|c| *c = 0);
        for inst in batch {
            self.counts[inst.y] += 1;
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn BatchClassifier> {
        Box::new(self.clone())
    }
}
