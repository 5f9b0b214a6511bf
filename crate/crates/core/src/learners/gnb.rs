//! Gaussian naive Bayes, in an incremental and a batch flavour.
//!
//! Both keep the same sufficient statistics (per class count, per
//! class/feature mean and sum of squared deviations) and share the posterior
//! computation; they differ only in how the statistics are accumulated.

use super::moments::RunningMoments;
use crate::stream::{
    check_class, check_dim, validate_batch, BatchClassifier, Classifier, Instance, ModelError,
    OnlineClassifier, Prediction,
};

const VAR_FLOOR_SCALE: f64 = 1e-9;
const VAR_FLOOR_OFFSET: f64 = 1e-12;

/// Per-feature variance floor `1e-9 * (global variance + 1e-12)`.
pub(crate) fn variance_floor(global_variance: f64) -> f64 {
    VAR_FLOOR_SCALE * (global_variance + VAR_FLOOR_OFFSET)
}

/// Log of prior times Gaussian likelihood for every class. Classes never
/// observed get `-inf`.
pub(crate) fn gaussian_log_joint(
    class_counts: &[u64],
    moments: &[RunningMoments],
    floors: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let d = x.len();
    let total: u64 = class_counts.iter().sum();
    class_counts
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            if n == 0 {
                return f64::NEG_INFINITY;
            }
            let mut lp = (n as f64 / total as f64).ln();
            for (j, &xj) in x.iter().enumerate() {
                let m = &moments[c * d + j];
                let var = m.variance().max(floors[j]);
                let diff = xj - m.mean;
                lp -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + diff * diff / (2.0 * var);
            }
            lp
        })
        .collect()
}

pub(crate) fn posterior(log_joint: &[f64]) -> Prediction {
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Prediction::untrained(log_joint.len());
    }
    let weights = log_joint.iter().map(|&l| (l - max).exp()).collect();
    Prediction::from_weights(weights)
}

#[derive(Debug, Clone)]
struct NbStats {
    n_features: usize,
    class_counts: Vec<u64>,
    /// Class-major, `class * n_features + feature`.
    moments: Vec<RunningMoments>,
    global: Vec<RunningMoments>,
}

impl NbStats {
    fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            class_counts: vec![0; n_classes],
            moments: vec![RunningMoments::new(); n_features * n_classes],
            global: vec![RunningMoments::new(); n_features],
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        if self.class_counts.iter().all(|&c| c == 0) {
            return Ok(Prediction::untrained(self.class_counts.len()));
        }
        let floors: Vec<f64> = self
            .global
            .iter()
            .map(|g| variance_floor(g.variance()))
            .collect();
        Ok(posterior(&gaussian_log_joint(
            &self.class_counts,
            &self.moments,
            &floors,
            x,
        )))
    }

    fn moments(&self, class: usize, feature: usize) -> &RunningMoments {
        &self.moments[class * self.n_features + feature]
    }
}

/// Incremental Gaussian NB (Welford updates).
#[derive(Debug, Clone)]
pub struct GaussianNb {
    stats: NbStats,
}

impl GaussianNb {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            stats: NbStats::new(n_features, n_classes),
        }
    }

    pub fn class_count(&self, class: usize) -> u64 {
        self.stats.class_counts[class]
    }

    pub fn class_mean(&self, class: usize, feature: usize) -> f64 {
        self.stats.moments(class, feature).mean
    }

    /// Unbiased within-class variance, before flooring.
    pub fn class_variance(&self, class: usize, feature: usize) -> f64 {
        self.stats.moments(class, feature).variance()
    }
}

impl Classifier for GaussianNb {
    fn n_classes(&self) -> usize {
        self.stats.class_counts.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        self.stats.predict(x)
    }
}

impl OnlineClassifier for GaussianNb {
    fn learn_one(&mut self, x: &[f64], y: usize) -> Result<(), ModelError> {
        check_dim(self.stats.n_features, x)?;
        check_class(self.stats.class_counts.len(), y)?;
        let d = self.stats.n_features;
        self.stats.class_counts[y] += 1;
        for (j, &xj) in x.iter().enumerate() {
            self.stats.moments[y * d + j].push(xj);
            self.stats.global[j].push(xj);
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn OnlineClassifier> {
        Box::new(self.clone())
    }
}

/// Gaussian NB fit from a whole batch with two-pass mean/variance.
#[derive(Debug, Clone)]
pub struct BatchGaussianNb {
    stats: NbStats,
}

impl BatchGaussianNb {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            stats: NbStats::new(n_features, n_classes),
        }
    }

    pub fn class_count(&self, class: usize) -> u64 {
        self.stats.class_counts[class]
    }

    pub fn class_mean(&self, class: usize, feature: usize) -> f64 {
        self.stats.moments(class, feature).mean
    }

    pub fn class_variance(&self, class: usize, feature: usize) -> f64 {
        self.stats.moments(class, feature).variance()
    }
}

fn two_pass(values: impl Iterator<Item = f64> + Clone) -> RunningMoments {
    let (n, sum) = values.clone().fold((0u64, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return RunningMoments::new();
    }
    let mean = sum / n as f64;
    let m2 = values.map(|v| (v - mean) * (v - mean)).sum();
    RunningMoments { count: n, mean, m2 }
}

impl Classifier for BatchGaussianNb {
    fn n_classes(&self) -> usize {
        self.stats.class_counts.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        self.stats.predict(x)
    }
}

impl BatchClassifier for BatchGaussianNb {
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError> {
        let d = self.stats.n_features;
        let k = self.stats.class_counts.len();
        validate_batch(batch, d, k)?;
        let mut stats = NbStats::new(d, k);
        for c in 0..k {
            let members: Vec<&Instance> = batch.iter().filter(|i| i.y == c).collect();
            stats.class_counts[c] = members.len() as u64;
            for j in 0..d {
                stats.moments[c * d + j] = two_pass(members.iter().map(|i| i.x[j]));
            }
        }
        for j in 0..d {
            stats.global[j] = two_pass(batch.iter().map(|i| i.x[j]));
        }
        self.stats = stats;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn BatchClassifier> {
        Box::new(self.clone())
    }
}
