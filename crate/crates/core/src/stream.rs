//! Shared data model: schemas, instances, predictions and the classifier
//! contracts every learner implements.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("feature vector has {got} values, schema expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class index {index} outside catalogue of {n_classes} classes")]
    UnknownClass { index: usize, n_classes: usize },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("duplicate class label `{0}`")]
    DuplicateClass(String),
    #[error("class catalogue must hold at least one non-empty label")]
    EmptyCatalogue,
    #[error("empty class label")]
    EmptyClassLabel,
    #[error("binary feature `{feature}` has value {value}")]
    NotBinary { feature: String, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("cannot fit on an empty batch")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// Source column of a one-hot encoded indicator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl FeatureDescriptor {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            group: None,
        }
    }
}

/// Column layout and class catalogue of a stream. The order of
/// `class_labels` is the global tie-break order: ties in any argmax resolve
/// to the lowest class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<FeatureDescriptor>,
    class_labels: Vec<String>,
    #[serde(default = "default_target")]
    target: String,
}

fn default_target() -> String {
    "class".to_string()
}

impl Schema {
    pub fn new(
        features: Vec<FeatureDescriptor>,
        class_labels: Vec<String>,
    ) -> Result<Self, SchemaError> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
        }
        if class_labels.is_empty() {
            return Err(SchemaError::EmptyCatalogue);
        }
        let mut seen = HashSet::new();
        for c in &class_labels {
            if c.is_empty() {
                return Err(SchemaError::EmptyClassLabel);
            }
            if !seen.insert(c.as_str()) {
                return Err(SchemaError::DuplicateClass(c.clone()));
            }
        }
        Ok(Self {
            features,
            class_labels,
            target: default_target(),
        })
    }

    /// Schema with `n_features` numeric columns `x0..` and classes `c0..`.
    pub fn numeric(n_features: usize, n_classes: usize) -> Self {
        let features = (0..n_features)
            .map(|j| FeatureDescriptor::new(format!("x{j}"), FeatureKind::Numeric))
            .collect();
        let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
        Self::new(features, classes).expect("generated names are unique")
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = target.into();
        self
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|c| c == label)
    }

    /// Re-validates invariants after deserialization.
    pub fn validate(&self) -> Result<(), SchemaError> {
        Schema::new(self.features.clone(), self.class_labels.clone()).map(|_| ())
    }

    pub fn check_x(&self, x: &[f64]) -> Result<(), SchemaError> {
        check_dim(self.n_features(), x)
    }

    pub fn check_instance(&self, inst: &Instance) -> Result<(), SchemaError> {
        self.check_x(&inst.x)?;
        for (f, &v) in self.features.iter().zip(&inst.x) {
            if f.kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
                return Err(SchemaError::NotBinary {
                    feature: f.name.clone(),
                    value: v,
                });
            }
        }
        check_class(self.n_classes(), inst.y)
    }
}

/// One labelled stream element.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: Vec<f64>,
    pub y: usize,
    pub seq: u64,
}

impl Instance {
    pub fn new(x: Vec<f64>, y: usize, seq: u64) -> Self {
        Self { x, y, seq }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Option<Vec<f64>>,
}

impl Prediction {
    pub fn hard(label: usize) -> Self {
        Self {
            label,
            scores: None,
        }
    }

    /// Normalizes non-negative `weights` into scores and takes the
    /// tie-broken argmax. All-zero weights become uniform.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            let k = weights.len().max(1) as f64;
            weights.iter_mut().for_each(|w| *w = 1.0 / k);
        }
        Self {
            label: argmax(&weights),
            scores: Some(weights),
        }
    }

    /// Uniform scores, label 0. Returned by every learner before it has seen
    /// any training data.
    pub fn untrained(n_classes: usize) -> Self {
        Self::from_weights(vec![1.0; n_classes.max(1)])
    }
}

/// Index of the first maximum; NaN entries never win.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), SchemaError> {
    if x.len() != expected {
        return Err(SchemaError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_class(n_classes: usize, y: usize) -> Result<(), SchemaError> {
    if y >= n_classes {
        return Err(SchemaError::UnknownClass {
            index: y,
            n_classes,
        });
    }
    Ok(())
}

/// Prediction side of every model. Implementations must not mutate state
/// when predicting.
pub trait Classifier: Send + Sync {
    fn n_classes(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError>;
}

pub trait OnlineClassifier: Classifier {
    fn learn_one(&mut self, x: &[f64], y: usize) -> Result<(), ModelError>;

    fn box_clone(&self) -> Box<dyn OnlineClassifier>;
}

pub trait BatchClassifier: Classifier {
    /// Replaces any previous state with a model trained on `batch`.
    fn fit(&mut self, batch: &[Instance]) -> Result<(), ModelError>;

    fn box_clone(&self) -> Box<dyn BatchClassifier>;
}

impl Clone for Box<dyn OnlineClassifier> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

impl Clone for Box<dyn BatchClassifier> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

pub(crate) fn validate_batch(
    batch: &[Instance],
    n_features: usize,
    n_classes: usize,
) -> Result<(), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for inst in batch {
        check_dim(n_features, &inst.x)?;
        check_class(n_classes, inst.y)?;
    }
    Ok(())
}
