//! What gets run on a stream: a single online learner, a single batch
//! learner under a drift strategy, or a hybrid ensemble.

use crate::drift::{strategy_by_id, DriftStrategy, PerformanceRule};
use crate::ensemble::{Combiner, EnsembleConfig, Member};
use crate::learners::{BatchAlgorithm, LearnerOptions, OnlineAlgorithm};
use crate::stream::Schema;
use serde::{Deserialize, Deserializer, Serialize};
use std::str::FromStr;

/// Strategies of the batch members of a default ensemble.
pub const DEFAULT_ENSEMBLE_STRATEGIES: [&str; 4] = ["S4", "S5", "S6", "S7"];

fn default_strategies() -> Vec<String> {
    DEFAULT_ENSEMBLE_STRATEGIES.iter().map(|s| s.to_string()).collect()
}

fn default_online() -> Vec<OnlineAlgorithm> {
    OnlineAlgorithm::DEFAULT_MEMBERS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    Online {
        algorithm: OnlineAlgorithm,
    },
    Batch {
        algorithm: BatchAlgorithm,
        strategy: String,
    },
    /// `batch = None` gives an online-only ensemble, an empty `online`
    /// list a batch-only one.
    Ensemble {
        combiner: Combiner,
        #[serde(default)]
        batch: Option<BatchAlgorithm>,
        #[serde(default = "default_strategies")]
        strategies: Vec<String>,
        #[serde(default = "default_online")]
        online: Vec<OnlineAlgorithm>,
    },
}

impl MethodSpec {
    pub fn ensemble(combiner: Combiner, batch: Option<BatchAlgorithm>, with_online: bool) -> Self {
        MethodSpec::Ensemble {
            combiner,
            batch,
            strategies: default_strategies(),
            online: if with_online { default_online() } else { Vec::new() },
        }
    }

    /// Display name: `ONB`, `RF S3`, `DS-RF`, `WV-BATCH`, `DS-ONLINE`.
    pub fn id(&self) -> String {
        match self {
            MethodSpec::Online { algorithm } => algorithm.abbreviation().to_string(),
            MethodSpec::Batch { algorithm, strategy } => {
                format!("{} {}", algorithm.abbreviation(), strategy.to_uppercase())
            }
            MethodSpec::Ensemble {
                combiner,
                batch,
                strategies,
                online,
            } => {
                let body = match batch {
                    Some(_) if online.is_empty() => "BATCH",
                    Some(b) if !strategies.is_empty() => b.abbreviation(),
                    _ => "ONLINE",
                };
                format!("{}-{body}", combiner.abbreviation())
            }
        }
    }

    pub fn combiner(&self) -> Combiner {
        match self {
            MethodSpec::Ensemble { combiner, .. } => *combiner,
            _ => Combiner::DynamicSwitching,
        }
    }

    /// Strategies used by the method's batch members, before overrides.
    pub fn strategy_ids(&self) -> Vec<&str> {
        match self {
            MethodSpec::Online { .. } => Vec::new(),
            MethodSpec::Batch { strategy, .. } => vec![strategy],
            MethodSpec::Ensemble {
                batch: Some(_),
                strategies,
                ..
            } => strategies.iter().map(String::as_str).collect(),
            MethodSpec::Ensemble { .. } => Vec::new(),
        }
    }

    pub fn validate(&self, overrides: &StrategyOverrides) -> Result<(), String> {
        for id in self.strategy_ids() {
            let s = strategy_by_id(id).map_err(|e| e.to_string())?;
            overrides.apply(s).validate().map_err(|e| e.to_string())?;
        }
        if let MethodSpec::Ensemble {
            batch,
            strategies,
            online,
            ..
        } = self
        {
            let n_batch = if batch.is_some() { strategies.len() } else { 0 };
            if n_batch + online.len() == 0 {
                return Err("ensemble has no members".into());
            }
        }
        Ok(())
    }

    /// Builds the members. Batch member `i` gets seed `seed + i`.
    pub fn build_members(
        &self,
        schema: &Schema,
        overrides: &StrategyOverrides,
        ensemble: &EnsembleConfig,
        learners: &LearnerOptions,
        seed: u64,
    ) -> Result<Vec<Member>, String> {
        self.validate(overrides)?;
        let (d, k) = (schema.n_features(), schema.n_classes());
        let batch_member = |alg: BatchAlgorithm, id: &str, i: usize| -> Member {
            let strategy = overrides.apply(strategy_by_id(id).expect("validated"));
            Member::batch(
                format!("{} {}", alg.abbreviation(), strategy.id),
                alg.build(d, k, seed.wrapping_add(i as u64), learners),
                strategy,
                ensemble.n_first_fit,
                ensemble.score_window,
            )
        };
        let online_member = |alg: OnlineAlgorithm| {
            Member::online(alg.abbreviation(), alg.build(d, k, learners), ensemble.score_window)
        };
        Ok(match self {
            MethodSpec::Online { algorithm } => vec![online_member(*algorithm)],
            MethodSpec::Batch { algorithm, strategy } => vec![batch_member(*algorithm, strategy, 0)],
            MethodSpec::Ensemble {
                batch,
                strategies,
                online,
                ..
            } => {
                let mut members = Vec::new();
                if let Some(alg) = batch {
                    for (i, s) in strategies.iter().enumerate() {
                        members.push(batch_member(*alg, s, i));
                    }
                }
                members.extend(online.iter().map(|&a| online_member(a)));
                members
            }
        })
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    /// Parses the shorthand names: `ONB`, `HAT`, `OLR` (also `GNB`, `HT`);
    /// `<ALG> <STRATEGY>` such as `RF S3` or `DT B1`; `DS-<ALG>`,
    /// `WV-<ALG>`, `DS-BATCH` (random-forest members only) and `DS-ONLINE`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        for (prefix, combiner) in [("DS-", Combiner::DynamicSwitching), ("WV-", Combiner::WeightedVoting)] {
            if let Some(rest) = upper.strip_prefix(prefix) {
                return match rest {
                    "BATCH" => Ok(MethodSpec::ensemble(combiner, Some(BatchAlgorithm::RandomForest), false)),
                    "ONLINE" => Ok(MethodSpec::ensemble(combiner, None, true)),
                    alg => {
                        let alg = BatchAlgorithm::from_str(alg).map_err(|e| e.to_string())?;
                        Ok(MethodSpec::ensemble(combiner, Some(alg), true))
                    }
                };
            }
        }
        let parts: Vec<&str> = upper.split_whitespace().collect();
        match parts[..] {
            [alg, strategy] => {
                let algorithm = BatchAlgorithm::from_str(alg).map_err(|e| e.to_string())?;
                let strategy = strategy_by_id(strategy).map_err(|e| e.to_string())?.id;
                Ok(MethodSpec::Batch { algorithm, strategy })
            }
            [name] => match OnlineAlgorithm::from_str(name) {
                Ok(algorithm) => Ok(MethodSpec::Online { algorithm }),
                Err(_) if BatchAlgorithm::from_str(name).is_ok() => {
                    Err(format!("batch method `{s}` needs a strategy, e.g. `{name} S3`"))
                }
                Err(e) => Err(e.to_string()),
            },
            _ => Err(format!("cannot parse method `{s}`")),
        }
    }
}

/// Accepts either a shorthand string or a full table.
pub(crate) fn deserialize_method<'de, D: Deserializer<'de>>(d: D) -> Result<MethodSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Field {
        Short(String),
        Spec(MethodSpec),
    }
    match Field::deserialize(d)? {
        Field::Short(s) => s.parse().map_err(serde::de::Error::custom),
        Field::Spec(spec) => Ok(spec),
    }
}

/// Per-experiment adjustments applied to every strategy of a method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyOverrides {
    pub theta: Option<f64>,
    pub window_s: Option<usize>,
    pub alpha: Option<f64>,
    pub n_first_fit: Option<u64>,
    pub performance_rule: Option<PerformanceRule>,
    /// Set to false to skip per-feature tests on very wide streams.
    pub monitor_features: Option<bool>,
}

impl StrategyOverrides {
    pub fn apply(&self, mut s: DriftStrategy) -> DriftStrategy {
        if let Some(v) = self.theta {
            s.theta = v;
        }
        if let Some(v) = self.window_s {
            s.window_s = v;
        }
        if let Some(v) = self.alpha {
            s.alpha = v;
        }
        if let Some(v) = self.n_first_fit {
            s.n_first_fit = Some(v);
        }
        if let Some(v) = self.performance_rule {
            s.performance_rule = v;
        }
        if let Some(v) = self.monitor_features {
            s.monitor_features = s.monitor_features && v;
        }
        s
    }
}
