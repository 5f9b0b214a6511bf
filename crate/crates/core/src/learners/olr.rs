//! Online logistic regression behind a running standard scaler.
//!
//! The scaler is updated with each instance before the SGD step on the
//! standardized vector. The default model is multinomial (softmax); a
//! one-vs-rest variant is selectable through [`Multiclass`].

use super::moments::RunningMoments;
use crate::stream::{
    check_class, check_dim, Classifier, ModelError, OnlineClassifier, Prediction,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiclass {
    #[default]
    Softmax,
    OneVsRest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlrConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub l1: f64,
    pub intercept_lr: f64,
    pub gradient_clip: f64,
    pub multiclass: Multiclass,
}

impl Default for OlrConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            l2: 1.0,
            l1: 0.0,
            intercept_lr: 0.01,
            gradient_clip: 1e12,
            multiclass: Multiclass::Softmax,
        }
    }
}

/// Running standardization with population variance; a zero variance maps
/// the coordinate to 0.
#[derive(Debug, Clone)]
pub struct StandardScaler {
    moments: Vec<RunningMoments>,
}

impl StandardScaler {
    pub fn new(n_features: usize) -> Self {
        Self {
            moments: vec![RunningMoments::new(); n_features],
        }
    }

    pub fn learn_one(&mut self, x: &[f64]) {
        for (m, &v) in self.moments.iter_mut().zip(x) {
            m.push(v);
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.moments
            .iter()
            .zip(x)
            .map(|(m, &v)| {
                let std = m.population_variance().sqrt();
                if std > 0.0 {
                    (v - m.mean) / std
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn count(&self) -> u64 {
        self.moments.first().map_or(0, |m| m.count)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Class-major, same layout as the weights.
    pub weights: Vec<f64>,
    pub intercepts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OnlineLogisticRegression {
    config: OlrConfig,
    n_features: usize,
    n_classes: usize,
    scaler: StandardScaler,
    weights: Vec<f64>,
    intercepts: Vec<f64>,
    seen: u64,
}

impl OnlineLogisticRegression {
    pub fn new(n_features: usize, n_classes: usize, config: OlrConfig) -> Self {
        Self {
            config,
            n_features,
            n_classes,
            scaler: StandardScaler::new(n_features),
            weights: vec![0.0; n_features * n_classes],
            intercepts: vec![0.0; n_classes],
            seen: 0,
        }
    }

    pub fn config(&self) -> &OlrConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn set_parameters(&mut self, weights: Vec<f64>, intercepts: Vec<f64>) {
        assert_eq!(weights.len(), self.n_features * self.n_classes);
        assert_eq!(intercepts.len(), self.n_classes);
        self.weights = weights;
        self.intercepts = intercepts;
    }

    pub fn scaler(&self) -> &StandardScaler {
        &self.scaler
    }

    pub fn logits(&self, x_std: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * d..(c + 1) * d];
                self.intercepts[c] + row.iter().zip(x_std).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Class probabilities for an already standardized vector.
    pub fn probabilities(&self, x_std: &[f64]) -> Vec<f64> {
        let z = self.logits(x_std);
        match self.config.multiclass {
            Multiclass::Softmax => softmax(&z),
            Multiclass::OneVsRest => {
                let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
                let s: f64 = p.iter().sum();
                p.into_iter().map(|v| v / s).collect()
            }
        }
    }

    fn penalty(&self) -> f64 {
        let l2: f64 = self.weights.iter().map(|w| w * w).sum();
        let l1: f64 = self.weights.iter().map(|w| w.abs()).sum();
        0.5 * self.config.l2 * l2 + self.config.l1 * l1
    }

    /// Regularized log loss of one standardized example.
    pub fn loss(&self, x_std: &[f64], y: usize) -> f64 {
        let z = self.logits(x_std);
        let data = match self.config.multiclass {
            Multiclass::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                lse - z[y]
            }
            Multiclass::OneVsRest => z
                .iter()
                .enumerate()
                .map(|(c, &v)| if c == y { softplus(-v) } else { softplus(v) })
                .sum(),
        };
        data + self.penalty()
    }

    /// Analytic gradient of [`loss`](Self::loss), with per-coordinate
    /// clipping applied.
    pub fn gradient(&self, x_std: &[f64], y: usize) -> Gradient {
        let d = self.n_features;
        let z = self.logits(x_std);
        let residual: Vec<f64> = match self.config.multiclass {
            Multiclass::Softmax => {
                let mut p = softmax(&z);
                p[y] -= 1.0;
                p
            }
            Multiclass::OneVsRest => z
                .iter()
                .enumerate()
                .map(|(c, &v)| sigmoid(v) - if c == y { 1.0 } else { 0.0 })
                .collect(),
        };
        let clip = self.config.gradient_clip;
        let mut gw = vec![0.0; d * self.n_classes];
        for c in 0..self.n_classes {
            for j in 0..d {
                let w = self.weights[c * d + j];
                let l1 = if w == 0.0 {
                    0.0
                } else {
                    self.config.l1 * w.signum()
                };
                let g = residual[c] * x_std[j] + self.config.l2 * w + l1;
                gw[c * d + j] = g.clamp(-clip, clip);
            }
        }
        let gb = residual.iter().map(|g| g.clamp(-clip, clip)).collect();
        Gradient {
            weights: gw,
            intercepts: gb,
        }
    }

    /// One SGD step on a standardized example.
    pub fn sgd_step(&mut self, x_std: &[f64], y: usize) {
        let g = self.gradient(x_std, y);
        let lr = self.config.learning_rate;
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            *w -= lr * gw;
        }
        let ilr = self.config.intercept_lr;
        for (b, gb) in self.intercepts.iter_mut().zip(&g.intercepts) {
            *b -= ilr * gb;
        }
    }
}

impl Classifier for OnlineLogisticRegression {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        if self.seen == 0 {
            return Ok(Prediction::untrained(self.n_classes));
        }
        let x_std = self.scaler.transform(x);
        Ok(Prediction::from_weights(self.probabilities(&x_std)))
    }
}

impl OnlineClassifier for OnlineLogisticRegression {
    fn learn_one(&mut self, x: &[f64], y: usize) -> Result<(), ModelError> {
        check_dim(self.n_features, x)?;
        check_class(self.n_classes, y)?;
        self.scaler.learn_one(x);
        let x_std = self.scaler.transform(x);
        self.sgd_step(&x_std, y);
        self.seen += 1;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn OnlineClassifier> {
        Box::new(self.clone())
    }
}
