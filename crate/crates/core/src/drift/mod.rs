//! Drift monitoring over adjacent reference/current windows.

use crate::eval::ConfusionMatrix;
use crate::stattests::{
    chi_squared, count_unique, js_divergence, ks_two_sample, population_std, wasserstein_1d,
    z_proportion_samples, SampleError, TestKind, TestOutcome,
};
use crate::stream::{FeatureKind, Instance, Schema};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Above this window size the distance-based tests replace the
/// significance tests.
pub const LARGE_WINDOW: usize = 1000;
/// Numeric columns with at most this many distinct values are tested as
/// categorical.
pub const MAX_DISCRETE_UNIQUE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainScope {
    /// Everything that arrived after the last model replacement (or since
    /// the start of the stream).
    SinceLastReplacement,
    /// Only the most recent `window_s` instances.
    LastWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerformanceRule {
    /// Drift when `F1_cur < (1 - alpha) * F1_ref`.
    #[default]
    RelativeDrop,
    /// Drift when `F1_cur < alpha * F1_ref`.
    Fraction,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("windows differ in size: reference {reference}, current {current}")]
    UnequalWindows { reference: usize, current: usize },
    #[error("strategy `{id}`: {reason}")]
    InvalidStrategy { id: String, reason: String },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftStrategy {
    pub id: String,
    pub monitor_features: bool,
    pub monitor_target: bool,
    pub monitor_performance: bool,
    pub theta: f64,
    pub window_s: usize,
    pub alpha: f64,
    pub retrain_scope: RetrainScope,
    #[serde(default)]
    pub performance_rule: PerformanceRule,
    /// Overrides the ensemble-wide first-fit point for this member.
    #[serde(default)]
    pub n_first_fit: Option<u64>,
}

impl DriftStrategy {
    pub fn monitors_anything(&self) -> bool {
        self.monitor_features || self.monitor_target || self.monitor_performance
    }

    pub fn validate(&self) -> Result<(), DriftError> {
        let bad = |reason: &str| {
            Err(DriftError::InvalidStrategy {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if (self.monitor_features || self.monitor_target) && !(self.theta > 0.0) {
            return bad("theta must be positive when a statistical monitor is on");
        }
        if self.window_s < 2 {
            return bad("window size must be at least 2");
        }
        Ok(())
    }

    /// Turns off input-feature monitoring, for very wide streams.
    pub fn without_feature_monitor(mut self) -> Self {
        self.monitor_features = false;
        self
    }
}

fn full(id: &str, theta: f64, s: usize, scope: RetrainScope) -> DriftStrategy {
    DriftStrategy {
        id: id.to_string(),
        monitor_features: true,
        monitor_target: true,
        monitor_performance: true,
        theta,
        window_s: s,
        alpha: 0.2,
        retrain_scope: scope,
        performance_rule: PerformanceRule::RelativeDrop,
        n_first_fit: None,
    }
}

fn performance_only(id: &str, s: usize, scope: RetrainScope) -> DriftStrategy {
    DriftStrategy {
        monitor_features: false,
        monitor_target: false,
        ..full(id, 0.0, s, scope)
    }
}

fn train_once(id: &str, n_first_fit: u64) -> DriftStrategy {
    DriftStrategy {
        monitor_features: false,
        monitor_target: false,
        monitor_performance: false,
        n_first_fit: Some(n_first_fit),
        ..full(id, 0.0, 2500, RetrainScope::SinceLastReplacement)
    }
}

/// The named strategies S1–S7 and the train-once baselines B1, B2.
pub fn make_strategy_catalog() -> Vec<DriftStrategy> {
    use RetrainScope::*;
    vec![
        full("S1", 0.03, 10_000, SinceLastReplacement),
        performance_only("S2", 10_000, SinceLastReplacement),
        full("S3", 0.02, 5_000, SinceLastReplacement),
        full("S4", 0.02, 2_500, SinceLastReplacement),
        performance_only("S5", 2_500, LastWindow),
        full("S6", 0.03, 10_000, SinceLastReplacement),
        full("S7", 0.02, 10_000, LastWindow),
        train_once("B1", 2_500),
        train_once("B2", 25_000),
    ]
}

pub fn strategy_by_id(id: &str) -> Result<DriftStrategy, DriftError> {
    make_strategy_catalog()
        .into_iter()
        .find(|s| s.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| DriftError::UnknownStrategy(id.to_string()))
}

/// Test for a column, or `None` for a constant column.
pub fn select_test(kind: FeatureKind, n_unique: usize, s: usize) -> Option<TestKind> {
    let large = s > LARGE_WINDOW;
    if n_unique <= 1 {
        return None;
    }
    let test = match kind {
        FeatureKind::Categorical => {
            if large {
                TestKind::JensenShannon
            } else {
                TestKind::ChiSquared
            }
        }
        _ if kind == FeatureKind::Binary || n_unique == 2 => {
            if large {
                TestKind::JensenShannon
            } else {
                TestKind::ZProportion
            }
        }
        _ if n_unique <= MAX_DISCRETE_UNIQUE => {
            if large {
                TestKind::JensenShannon
            } else {
                TestKind::ChiSquared
            }
        }
        _ => {
            if large {
                TestKind::Wasserstein
            } else {
                TestKind::KolmogorovSmirnov
            }
        }
    };
    Some(test)
}

/// Runs `test` on one column. JS on a numeric column with few distinct
/// values treats them as categories.
pub fn run_test(
    test: TestKind,
    kind: FeatureKind,
    reference: &[f64],
    current: &[f64],
) -> Result<TestOutcome, SampleError> {
    match test {
        TestKind::KolmogorovSmirnov => ks_two_sample(reference, current),
        TestKind::Wasserstein => wasserstein_1d(reference, current, population_std(reference)),
        TestKind::JensenShannon => {
            let kind = match kind {
                FeatureKind::Numeric
                    if count_unique(reference, current) <= MAX_DISCRETE_UNIQUE =>
                {
                    FeatureKind::Categorical
                }
                k => k,
            };
            js_divergence(reference, current, kind)
        }
        TestKind::ChiSquared => chi_squared(reference, current),
        TestKind::ZProportion => z_proportion_samples(reference, current),
    }
}

/// An instance together with the prediction the monitored model made for
/// it before seeing its label.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredRecord {
    pub instance: Instance,
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct WindowPair<'a> {
    pub reference: &'a [MonitoredRecord],
    pub current: &'a [MonitoredRecord],
}

impl<'a> WindowPair<'a> {
    /// Splits `records` (oldest first, even length) into two halves.
    pub fn split(records: &'a [MonitoredRecord]) -> Self {
        let (reference, current) = records.split_at(records.len() / 2);
        Self { reference, current }
    }

    pub fn window_size(&self) -> usize {
        self.current.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriggerSource {
    Feature(String),
    Target,
    Performance,
}

impl fmt::Display for TriggerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerSource::Feature(name) => write!(f, "feature:{name}"),
            TriggerSource::Target => f.write_str("target"),
            TriggerSource::Performance => f.write_str("performance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub source: TriggerSource,
    /// Test drift score, or the current-window F1 for performance triggers.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub drifted: bool,
    pub triggers: Vec<Trigger>,
}

impl DriftVerdict {
    fn from_triggers(triggers: Vec<Trigger>) -> Self {
        Self {
            drifted: !triggers.is_empty(),
            triggers,
        }
    }
}

fn window_f1(records: &[MonitoredRecord], n_classes: usize) -> f64 {
    ConfusionMatrix::from_pairs(
        n_classes,
        records.iter().map(|r| (r.instance.y, r.predicted)),
    )
    .f1_macro()
    .unwrap_or(0.0)
}

/// Whether the performance monitor fires for the given window scores.
pub fn performance_dropped(rule: PerformanceRule, alpha: f64, f1_ref: f64, f1_cur: f64) -> bool {
    match rule {
        PerformanceRule::RelativeDrop => f1_cur < (1.0 - alpha) * f1_ref,
        PerformanceRule::Fraction => f1_cur < alpha * f1_ref,
    }
}

fn column(records: &[MonitoredRecord], j: usize) -> Vec<f64> {
    records.iter().map(|r| r.instance.x[j]).collect()
}

fn test_column(
    kind: FeatureKind,
    a: &[f64],
    b: &[f64],
    theta: f64,
) -> Result<Option<f64>, SampleError> {
    let s = b.len();
    let Some(test) = select_test(kind, count_unique(a, b), s) else {
        return Ok(None);
    };
    let outcome = run_test(test, kind, a, b)?;
    Ok(outcome.is_drift(theta).then_some(outcome.drift_score))
}

/// Applies every monitor enabled in `strategy`. Feature columns are tested
/// in parallel; trigger order is features (schema order), target,
/// performance.
pub fn check_windows(
    pair: WindowPair<'_>,
    strategy: &DriftStrategy,
    schema: &Schema,
) -> Result<DriftVerdict, DriftError> {
    if pair.reference.len() != pair.current.len() {
        return Err(DriftError::UnequalWindows {
            reference: pair.reference.len(),
            current: pair.current.len(),
        });
    }
    if pair.current.is_empty() {
        return Ok(DriftVerdict::default());
    }
    let mut triggers = Vec::new();
    if strategy.monitor_features {
        let per_feature: Vec<Result<Option<Trigger>, SampleError>> = schema
            .features()
            .par_iter()
            .enumerate()
            .map(|(j, f)| {
                let a = column(pair.reference, j);
                let b = column(pair.current, j);
                Ok(test_column(f.kind, &a, &b, strategy.theta)?.map(|score| Trigger {
                    source: TriggerSource::Feature(f.name.clone()),
                    score,
                }))
            })
            .collect();
        for t in per_feature {
            triggers.extend(t?);
        }
    }
    if strategy.monitor_target {
        let a: Vec<f64> = pair.reference.iter().map(|r| r.instance.y as f64).collect();
        let b: Vec<f64> = pair.current.iter().map(|r| r.instance.y as f64).collect();
        if let Some(score) = test_column(FeatureKind::Categorical, &a, &b, strategy.theta)? {
            triggers.push(Trigger {
                source: TriggerSource::Target,
                score,
            });
        }
    }
    if strategy.monitor_performance {
        let k = schema.n_classes();
        let f1_ref = window_f1(pair.reference, k);
        let f1_cur = window_f1(pair.current, k);
        if performance_dropped(strategy.performance_rule, strategy.alpha, f1_ref, f1_cur) {
            triggers.push(Trigger {
                source: TriggerSource::Performance,
                score: f1_cur,
            });
        }
    }
    Ok(DriftVerdict::from_triggers(triggers))
}
