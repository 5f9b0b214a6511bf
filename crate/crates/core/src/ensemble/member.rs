use crate::drift::{check_windows, DriftStrategy, MonitoredRecord, RetrainScope, WindowPair};
use crate::eval::{ConfusionMatrix, Event, EventKind, WindowedConfusion};
use crate::stream::{BatchClassifier, Instance, OnlineClassifier, Prediction, Schema};
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Metric a shadow model must beat the incumbent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMetric {
    #[default]
    F1Macro,
    Accuracy,
}

impl ComparisonMetric {
    fn score(self, cm: &ConfusionMatrix) -> f64 {
        match self {
            ComparisonMetric::F1Macro => cm.f1_macro(),
            ComparisonMetric::Accuracy => cm.accuracy(),
        }
        .unwrap_or(0.0)
    }
}

/// Lifecycle parameters a member needs from the ensemble configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lifecycle {
    pub n_comp: usize,
    pub cache_cap: usize,
    pub comparison: ComparisonMetric,
}

#[derive(Clone)]
struct Shadow {
    model: Box<dyn BatchClassifier>,
    started_at: u64,
    /// `(truth, shadow prediction, incumbent prediction)`
    records: Vec<(usize, usize, usize)>,
}

#[derive(Clone)]
pub(crate) struct BatchState {
    /// Untrained prototype cloned for every (re)fit.
    template: Box<dyn BatchClassifier>,
    model: Box<dyn BatchClassifier>,
    strategy: DriftStrategy,
    n_first_fit: u64,
    fitted: bool,
    cache: VecDeque<Instance>,
    cache_counts: Vec<u64>,
    dropped_from_cache: u64,
    history: VecDeque<MonitoredRecord>,
    since_check: usize,
    shadow: Option<Shadow>,
}

#[derive(Clone)]
pub(crate) enum Learner {
    Online(Box<dyn OnlineClassifier>),
    Batch(Box<BatchState>),
}

/// One ensemble slot.
#[derive(Clone)]
pub struct Member {
    id: String,
    learner: Learner,
    n_classes: usize,
    score_window: WindowedConfusion,
    drift_count: u64,
    replacement_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberKind {
    Online,
    Batch,
}

impl Member {
    pub fn online(id: impl Into<String>, model: Box<dyn OnlineClassifier>, score_window: usize) -> Self {
        let n_classes = model.n_classes();
        Self {
            id: id.into(),
            learner: Learner::Online(model),
            n_classes,
            score_window: WindowedConfusion::new(n_classes, score_window),
            drift_count: 0,
            replacement_count: 0,
        }
    }

    /// `model` must be untrained; it is kept as the prototype for refits.
    /// `n_first_fit` is used unless the strategy overrides it.
    pub fn batch(
        id: impl Into<String>,
        model: Box<dyn BatchClassifier>,
        strategy: DriftStrategy,
        n_first_fit: u64,
        score_window: usize,
    ) -> Self {
        let n_classes = model.n_classes();
        let n_first_fit = strategy.n_first_fit.unwrap_or(n_first_fit);
        Self {
            id: id.into(),
            learner: Learner::Batch(Box::new(BatchState {
                template: model.clone(),
                model,
                strategy,
                n_first_fit,
                fitted: false,
                cache: VecDeque::new(),
                cache_counts: vec![0; n_classes],
                dropped_from_cache: 0,
                history: VecDeque::new(),
                since_check: 0,
                shadow: None,
            })),
            n_classes,
            score_window: WindowedConfusion::new(n_classes, score_window),
            drift_count: 0,
            replacement_count: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> MemberKind {
        match self.learner {
            Learner::Online(_) => MemberKind::Online,
            Learner::Batch(_) => MemberKind::Batch,
        }
    }

    pub fn strategy(&self) -> Option<&DriftStrategy> {
        match &self.learner {
            Learner::Batch(b) => Some(&b.strategy),
            Learner::Online(_) => None,
        }
    }

    pub fn drift_count(&self) -> u64 {
        self.drift_count
    }

    pub fn replacement_count(&self) -> u64 {
        self.replacement_count
    }

    /// F1-macro over the member's recent predictions.
    pub fn score(&self) -> f64 {
        self.score_window.f1_macro()
    }

    pub fn is_fitted(&self) -> bool {
        match &self.learner {
            Learner::Batch(b) => b.fitted,
            Learner::Online(_) => true,
        }
    }

    pub fn has_shadow(&self) -> bool {
        matches!(&self.learner, Learner::Batch(b) if b.shadow.is_some())
    }

    pub fn cache_len(&self) -> usize {
        match &self.learner {
            Learner::Batch(b) => b.cache.len(),
            Learner::Online(_) => 0,
        }
    }

    /// Sequence numbers currently cached, oldest first.
    pub fn cached_seqs(&self) -> Vec<u64> {
        match &self.learner {
            Learner::Batch(b) => b.cache.iter().map(|i| i.seq).collect(),
            Learner::Online(_) => Vec::new(),
        }
    }

    /// The member's vote for `x`. Batch members answer with the majority
    /// class of their cache until their first fit. Model errors fall back
    /// to class 0.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let result = match &self.learner {
            Learner::Online(m) => m.predict(x),
            Learner::Batch(b) if !b.fitted => {
                let w: Vec<f64> = b.cache_counts.iter().map(|&c| c as f64).collect();
                Ok(Prediction::from_weights(w))
            }
            Learner::Batch(b) => b.model.predict(x),
        };
        result.unwrap_or_else(|e| {
            warn!("member {}: prediction failed ({e}); using fallback", self.id);
            Prediction::untrained(self.n_classes)
        })
    }

    pub(crate) fn record_score(&mut self, truth: usize, predicted: usize) {
        self.score_window.push(truth, predicted);
    }

    /// Training phase for one instance; `predicted` is this member's own
    /// vote for it.
    pub(crate) fn learn(
        &mut self,
        inst: &Instance,
        predicted: usize,
        schema: &Schema,
        life: &Lifecycle,
    ) -> Vec<Event> {
        let id = &self.id;
        match &mut self.learner {
            Learner::Online(m) => {
                if let Err(e) = m.learn_one(&inst.x, inst.y) {
                    warn!("member {id}: update failed ({e})");
                }
                Vec::new()
            }
            Learner::Batch(b) => {
                let mut events = Vec::new();
                let (drifted, replaced) = b.step(id, inst, predicted, schema, life, &mut events);
                self.drift_count += drifted as u64;
                self.replacement_count += replaced as u64;
                events
            }
        }
    }
}

impl BatchState {
    fn push_cache(&mut self, inst: &Instance, cap: usize) {
        self.cache.push_back(inst.clone());
        self.cache_counts[inst.y] += 1;
        let limit = match (self.fitted, self.strategy.retrain_scope) {
            (true, RetrainScope::LastWindow) => self.strategy.window_s.min(cap),
            _ => cap,
        };
        while self.cache.len() > limit {
            let old = self.cache.pop_front().expect("non-empty");
            self.cache_counts[old.y] -= 1;
            if self.strategy.retrain_scope == RetrainScope::SinceLastReplacement {
                self.dropped_from_cache += 1;
                if self.dropped_from_cache == 1 || self.dropped_from_cache % 10_000 == 0 {
                    warn!(
                        "cache cap of {cap} reached; {} oldest instances dropped so far",
                        self.dropped_from_cache
                    );
                }
            }
        }
    }

    fn clear_cache(&mut self) {
        self.cache.clear();
        self.cache_counts.iter_mut().for_each(|c| *c = 0);
    }

    fn fit_on(&self, batch: &[Instance]) -> Option<Box<dyn BatchClassifier>> {
        let mut model = self.template.clone();
        match model.fit(batch) {
            Ok(()) => Some(model),
            Err(e) => {
                warn!("fit on {} instances failed: {e}", batch.len());
                None
            }
        }
    }

    /// Returns `(drift detected, model replaced)`.
    fn step(
        &mut self,
        id: &str,
        inst: &Instance,
        predicted: usize,
        schema: &Schema,
        life: &Lifecycle,
        events: &mut Vec<Event>,
    ) -> (bool, bool) {
        self.push_cache(inst, life.cache_cap);
        let i = inst.seq + 1;
        if !self.fitted {
            if i >= self.n_first_fit {
                let batch: Vec<Instance> = self.cache.iter().cloned().collect();
                if let Some(m) = self.fit_on(&batch) {
                    debug!("member {id}: first fit on {} instances at seq {}", batch.len(), inst.seq);
                    self.model = m;
                    self.fitted = true;
                    if self.strategy.retrain_scope == RetrainScope::LastWindow {
                        let s = self.strategy.window_s;
                        while self.cache.len() > s {
                            let old = self.cache.pop_front().expect("non-empty");
                            self.cache_counts[old.y] -= 1;
                        }
                    }
                }
            }
            return (false, false);
        }

        let replaced = self.shadow_step(id, inst, predicted, life, events);

        if !self.strategy.monitors_anything() {
            return (false, replaced);
        }
        let s = self.strategy.window_s;
        self.history.push_back(MonitoredRecord {
            instance: inst.clone(),
            predicted,
        });
        while self.history.len() > 2 * s {
            self.history.pop_front();
        }
        self.since_check += 1;
        if self.since_check < s {
            return (false, replaced);
        }
        self.since_check = 0;
        if self.shadow.is_some() || self.history.len() < 2 * s {
            return (false, replaced);
        }
        let records = self.history.make_contiguous();
        let verdict = match check_windows(WindowPair::split(records), &self.strategy, schema) {
            Ok(v) => v,
            Err(e) => {
                warn!("member {id}: drift check failed ({e})");
                return (false, replaced);
            }
        };
        if !verdict.drifted {
            return (false, replaced);
        }
        for t in &verdict.triggers {
            events.push(Event {
                seq: inst.seq,
                member: id.to_string(),
                event: EventKind::Drift,
                source: t.source.to_string(),
                score: t.score,
            });
        }
        let slice: Vec<Instance> = match self.strategy.retrain_scope {
            RetrainScope::SinceLastReplacement => self.cache.iter().cloned().collect(),
            RetrainScope::LastWindow => {
                let skip = self.cache.len().saturating_sub(s);
                self.cache.iter().skip(skip).cloned().collect()
            }
        };
        debug!(
            "member {id}: drift at seq {}, retraining on {} instances",
            inst.seq,
            slice.len()
        );
        if let Some(model) = self.fit_on(&slice) {
            self.shadow = Some(Shadow {
                model,
                started_at: inst.seq,
                records: Vec::with_capacity(life.n_comp),
            });
        }
        (true, replaced)
    }

    /// Scores a pending shadow on `inst`; decides once `n_comp` records are
    /// in. Returns whether the shadow replaced the incumbent.
    fn shadow_step(
        &mut self,
        id: &str,
        inst: &Instance,
        incumbent: usize,
        life: &Lifecycle,
        events: &mut Vec<Event>,
    ) -> bool {
        let Some(shadow) = self.shadow.as_mut() else {
            return false;
        };
        if inst.seq <= shadow.started_at {
            return false;
        }
        let label = shadow.model.predict(&inst.x).map(|p| p.label).unwrap_or(0);
        shadow.records.push((inst.y, label, incumbent));
        if shadow.records.len() < life.n_comp {
            return false;
        }
        let k = self.cache_counts.len();
        let shadow_cm = ConfusionMatrix::from_pairs(k, shadow.records.iter().map(|r| (r.0, r.1)));
        let incumbent_cm = ConfusionMatrix::from_pairs(k, shadow.records.iter().map(|r| (r.0, r.2)));
        let shadow_score = life.comparison.score(&shadow_cm);
        let incumbent_score = life.comparison.score(&incumbent_cm);
        let shadow = self.shadow.take().expect("checked above");
        if shadow_score > incumbent_score {
            debug!(
                "member {id}: shadow wins {shadow_score:.4} vs {incumbent_score:.4} at seq {}",
                inst.seq
            );
            self.model = shadow.model;
            if self.strategy.retrain_scope == RetrainScope::SinceLastReplacement {
                self.clear_cache();
            }
            events.push(Event {
                seq: inst.seq,
                member: id.to_string(),
                event: EventKind::Replace,
                source: "shadow".to_string(),
                score: shadow_score,
            });
            true
        } else {
            debug!(
                "member {id}: shadow rejected {shadow_score:.4} vs {incumbent_score:.4} at seq {}",
                inst.seq
            );
            false
        }
    }
}
