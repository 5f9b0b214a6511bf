//! Hybrid ensemble of batch members (with drift-triggered shadow retraining)
//! and online members, combined by weighted voting or dynamic switching.
//!
//! Each instance is processed test-then-train: every member votes and the
//! combined prediction is fixed before the label is used for anything.

mod member;

pub use member::{ComparisonMetric, Lifecycle, Member, MemberKind};

use crate::eval::{Event, MemberSummary, Prequential};
use crate::stream::{argmax, Instance, Schema};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Combiner {
    /// Weights proportional to each member's windowed F1.
    #[serde(rename = "WV", alias = "wv")]
    WeightedVoting,
    /// All weight on the best-scoring member.
    #[serde(rename = "DS", alias = "ds")]
    DynamicSwitching,
}

impl Combiner {
    pub fn abbreviation(self) -> &'static str {
        match self {
            Combiner::WeightedVoting => "WV",
            Combiner::DynamicSwitching => "DS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub combiner: Combiner,
    pub n_first_fit: u64,
    pub n_comp: usize,
    pub score_window: usize,
    pub cache_cap: usize,
    pub comparison: ComparisonMetric,
    /// Window of the ensemble's own windowed F1.
    pub metric_window: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            combiner: Combiner::DynamicSwitching,
            n_first_fit: 2500,
            n_comp: 500,
            score_window: 500,
            cache_cap: 200_000,
            comparison: ComparisonMetric::F1Macro,
            metric_window: 1000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("an ensemble needs at least one member")]
    NoMembers,
    #[error("invalid ensemble setting: {0}")]
    InvalidConfig(String),
    #[error("member `{id}` has {got} classes, schema has {expected}")]
    ClassMismatch { id: String, expected: usize, got: usize },
    #[error("duplicate member id `{0}`")]
    DuplicateMember(String),
    #[error("expected instance seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error(transparent)]
    Schema(#[from] crate::stream::SchemaError),
}

/// Member weights from their scores. WV normalizes (uniform when all scores
/// are zero); DS puts all weight on the first best member.
pub fn compute_weights(scores: &[f64], combiner: Combiner) -> Vec<f64> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    match combiner {
        Combiner::WeightedVoting => {
            let total: f64 = scores.iter().sum();
            if total > 0.0 {
                scores.iter().map(|s| s / total).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        }
        Combiner::DynamicSwitching => {
            let mut w = vec![0.0; n];
            w[argmax(scores)] = 1.0;
            w
        }
    }
}

/// Weighted hard vote; ties go to the lowest class index.
pub fn combine_votes(predictions: &[usize], weights: &[f64], n_classes: usize) -> usize {
    assert_eq!(predictions.len(), weights.len(), "one weight per prediction");
    let mut tally = vec![0.0; n_classes];
    for (&p, &w) in predictions.iter().zip(weights) {
        tally[p] += w;
    }
    argmax(&tally)
}

/// Everything decided before the label is revealed.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub member_predictions: Vec<usize>,
    pub weights: Vec<f64>,
    pub prediction: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub seq: u64,
    pub vote: Vote,
    pub events: Vec<Event>,
}

impl StepOutcome {
    pub fn prediction(&self) -> usize {
        self.vote.prediction
    }
}

#[derive(Clone)]
pub struct Ensemble {
    schema: Schema,
    config: EnsembleConfig,
    members: Vec<Member>,
    metrics: Prequential,
    next_seq: u64,
}

impl Ensemble {
    pub fn new(
        schema: Schema,
        config: EnsembleConfig,
        members: Vec<Member>,
    ) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        if config.n_comp == 0 || config.score_window == 0 || config.metric_window == 0 {
            return Err(EnsembleError::InvalidConfig(
                "n_comp, score_window and metric_window must be positive".into(),
            ));
        }
        if config.cache_cap == 0 {
            return Err(EnsembleError::InvalidConfig("cache_cap must be positive".into()));
        }
        let k = schema.n_classes();
        let mut seen = std::collections::HashSet::new();
        for m in &members {
            if !seen.insert(m.id().to_string()) {
                return Err(EnsembleError::DuplicateMember(m.id().to_string()));
            }
            let got = m.predict(&vec![0.0; schema.n_features()]).scores.map_or(k, |s| s.len());
            if got != k {
                return Err(EnsembleError::ClassMismatch {
                    id: m.id().to_string(),
                    expected: k,
                    got,
                });
            }
        }
        let metrics = Prequential::new(k, config.metric_window);
        Ok(Self {
            schema,
            config,
            members,
            metrics,
            next_seq: 0,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn metrics(&self) -> &Prequential {
        &self.metrics
    }

    pub fn drift_count(&self) -> u64 {
        self.members.iter().map(Member::drift_count).sum()
    }

    pub fn replacement_count(&self) -> u64 {
        self.members.iter().map(Member::replacement_count).sum()
    }

    pub fn member_summaries(&self) -> Vec<MemberSummary> {
        self.members
            .iter()
            .map(|m| MemberSummary {
                id: m.id().to_string(),
                drift_count: m.drift_count(),
                replacement_count: m.replacement_count(),
            })
            .collect()
    }

    fn lifecycle(&self) -> Lifecycle {
        Lifecycle {
            n_comp: self.config.n_comp,
            cache_cap: self.config.cache_cap,
            comparison: self.config.comparison,
        }
    }

    /// Member votes, weights from the scores accumulated so far, and the
    /// combined prediction. Does not change any state.
    pub fn vote(&self, x: &[f64]) -> Vote {
        let member_predictions: Vec<usize> =
            self.members.par_iter().map(|m| m.predict(x).label).collect();
        let scores: Vec<f64> = self.members.iter().map(Member::score).collect();
        let weights = compute_weights(&scores, self.config.combiner);
        let prediction = combine_votes(&member_predictions, &weights, self.schema.n_classes());
        Vote {
            member_predictions,
            weights,
            prediction,
        }
    }

    /// Training phase for `inst` given the vote made for it.
    pub fn learn(&mut self, inst: &Instance, vote: &Vote) -> Vec<Event> {
        for (m, &p) in self.members.iter_mut().zip(&vote.member_predictions) {
            m.record_score(inst.y, p);
        }
        let life = self.lifecycle();
        let schema = &self.schema;
        let per_member: Vec<Vec<Event>> = self
            .members
            .par_iter_mut()
            .zip(&vote.member_predictions)
            .map(|(m, &p)| m.learn(inst, p, schema, &life))
            .collect();
        self.metrics.update(inst.y, vote.prediction);
        self.next_seq = inst.seq + 1;
        per_member.into_iter().flatten().collect()
    }

    /// One full test-then-train step.
    pub fn process_instance(&mut self, inst: &Instance) -> Result<StepOutcome, EnsembleError> {
        if inst.seq != self.next_seq {
            return Err(EnsembleError::OutOfOrder {
                expected: self.next_seq,
                got: inst.seq,
            });
        }
        self.schema.check_instance(inst)?;
        let vote = self.vote(&inst.x);
        let events = self.learn(inst, &vote);
        Ok(StepOutcome {
            seq: inst.seq,
            vote,
            events,
        })
    }
}
