use crate::stream::{
    check_dim, validate_batch, BatchClassifier, Classifier, Instance, ModelError, Prediction,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchLrConfig {
    /// Inverse regularization strength, as in the usual `C` parametrization.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for BatchLrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Multinomial logistic regression trained by full-batch gradient descent
/// with backtracking, on a batch standardized with its own mean and std.
#[derive(Debug, Clone)]
pub struct BatchLogisticRegression {
    config: BatchLrConfig,
    n_features: usize,
    n_classes: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `n_classes x (n_features + 1)`, intercept last.
    params: Vec<f64>,
    trained: bool,
    iterations: usize,
}

struct Objective<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [usize],
    n_classes: usize,
    l2: f64,
}

impl Objective<'_> {
    fn stride(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len()) + 1
    }

    fn logits(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let s = self.stride();
        for (c, o) in out.iter_mut().enumerate() {
            let row = &params[c * s..(c + 1) * s];
            *o = row[s - 1] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn value_and_gradient(&self, params: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let s = self.stride();
        let n = self.xs.len() as f64;
        let mut z = vec![0.0; self.n_classes];
        let mut loss = 0.0;
        let mut g_acc = grad.as_ref().map(|_| vec![0.0; params.len()]);
        for (x, &y) in self.xs.iter().zip(self.ys) {
            self.logits(params, x, &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
            loss += max + sum.ln() - z[y];
            if let Some(g) = g_acc.as_mut() {
                for c in 0..self.n_classes {
                    let r = (z[c] - max).exp() / sum - if c == y { 1.0 } else { 0.0 };
                    let row = &mut g[c * s..(c + 1) * s];
                    for (gj, xj) in row.iter_mut().zip(x) {
                        *gj += r * xj;
                    }
                    row[s - 1] += r;
                }
            }
        }
        let mut penalty = 0.0;
        for c in 0..self.n_classes {
            for j in 0..s - 1 {
                let w = params[c * s + j];
                penalty += w * w;
            }
        }
        if let (Some(g), Some(acc)) = (grad, g_acc) {
            for (i, gi) in g.iter_mut().enumerate() {
                let is_bias = i % s == s - 1;
                *gi = acc[i] / n + if is_bias { 0.0 } else { self.l2 * params[i] / n };
            }
        }
        loss / n + 0.5 * self.l2 * penalty / n
    }
}

impl BatchLogisticRegression {
    pub fn new(n_features: usize, n_classes: usize, config: BatchLrConfig) -> Self {
        Self {
            config,
            n_features,
            n_classes,
            mean: vec![0.0; n_features],
            scale: vec![1.0; n_features],
            params: vec![0.0; n_classes * (n_features + 1)],
            trained: false,
            iterations: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

impl Classifier for BatchLogisticRegression {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        check_dim(self.n_features, x)?;
        if !self.trained {
            return Ok(Prediction::untrained(self.n_classes));
        }
        let xs = self.standardize(x);
        let s = self.n_features + 1;
        let z: Vec<f64> = (0..self.n_classes)
            .map(|c| {
                let row = &self.params[c * s..(c + 1) * s];
                row[s - 1] + row.iter().zip(&xs).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Prediction::from_weights(
            z.iter().map(|v| (v - max).exp()).collect(),
        ))
    }
}

impl BatchClassifier for BatchLogisticRegression {
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError> {
        validate_batch(batch, self.n_features, self.n_classes)?;
        let n = batch.len() as f64;
        let d = self.n_features;
        for j in 0..d {
            let mean = batch.iter().map(|i| i.x[j]).sum::<f64>() / n;
            let var = batch.iter().map(|i| (i.x[j] - mean).powi(2)).sum::<f64>() / n;
            self.mean[j] = mean;
            self.scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let xs: Vec<Vec<f64>> = batch.iter().map(|i| self.standardize(&i.x)).collect();
        let ys: Vec<usize> = batch.iter().map(|i| i.y).collect();
        let obj = Objective {
            xs: &xs,
            ys: &ys,
            n_classes: self.n_classes,
            l2: 1.0 / self.config.c,
        };
        let mut params = vec![0.0; self.n_classes * (d + 1)];
        let mut grad = vec![0.0; params.len()];
        let mut value = obj.value_and_gradient(&params, Some(&mut grad));
        let mut step = 1.0;
        let mut iterations = 0;
        let mut candidate = vec![0.0; params.len()];
        while iterations < self.config.max_iter {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < self.config.tol {
                break;
            }
            iterations += 1;
            step *= 2.0;
            loop {
                for ((c, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                    *c = p - step * g;
                }
                let v = obj.value_and_gradient(&candidate, None);
                if v <= value - 1e-4 * step * gnorm2 || step < 1e-12 {
                    break;
                }
                step *= 0.5;
            }
            std::mem::swap(&mut params, &mut candidate);
            value = obj.value_and_gradient(&params, Some(&mut grad));
        }
        self.params = params;
        self.iterations = iterations;
        self.trained = true;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn BatchClassifier> {
        Box::new(self.clone())
    }
}
