//! Concrete classifiers behind the [`Classifier`](crate::stream::Classifier)
//! contracts, plus factories used by the ensemble and experiment layers.

pub mod batch_lr;
pub mod cart;
pub mod forest;
pub mod gnb;
pub mod hoeffding;
pub mod majority;
pub mod moments;
pub mod olr;

pub use batch_lr::{BatchLogisticRegression, BatchLrConfig};
pub use cart::{CartConfig, DecisionTree, MaxFeatures};
pub use forest::{ForestConfig, RandomForest};
pub use gnb::{BatchGaussianNb, GaussianNb};
pub use hoeffding::{hoeffding_bound, HoeffdingConfig, HoeffdingNodeStats, HoeffdingTree, SplitDecision};
pub use majority::{majority_class, MajorityClass};
pub use moments::RunningMoments;
pub use olr::{Multiclass, OlrConfig, OnlineLogisticRegression, StandardScaler};

use crate::stream::{BatchClassifier, OnlineClassifier};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Hyperparameters for every learner family; unset fields take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerOptions {
    pub forest: ForestConfig,
    pub tree: CartConfig,
    pub logistic: BatchLrConfig,
    pub online_logistic: OlrConfig,
    pub hoeffding: HoeffdingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BatchAlgorithm {
    NaiveBayes,
    LogisticRegression,
    DecisionTree,
    RandomForest,
}

impl BatchAlgorithm {
    pub const ALL: [BatchAlgorithm; 4] = [
        BatchAlgorithm::NaiveBayes,
        BatchAlgorithm::LogisticRegression,
        BatchAlgorithm::DecisionTree,
        BatchAlgorithm::RandomForest,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            BatchAlgorithm::NaiveBayes => "NB",
            BatchAlgorithm::LogisticRegression => "LR",
            BatchAlgorithm::DecisionTree => "DT",
            BatchAlgorithm::RandomForest => "RF",
        }
    }

    /// Untrained model; `seed` drives any randomized fitting.
    pub fn build(
        self,
        n_features: usize,
        n_classes: usize,
        seed: u64,
        options: &LearnerOptions,
    ) -> Box<dyn BatchClassifier> {
        match self {
            BatchAlgorithm::NaiveBayes => Box::new(BatchGaussianNb::new(n_features, n_classes)),
            BatchAlgorithm::LogisticRegression => Box::new(BatchLogisticRegression::new(
                n_features,
                n_classes,
                options.logistic.clone(),
            )),
            BatchAlgorithm::DecisionTree => Box::new(DecisionTree::new(
                n_features,
                n_classes,
                CartConfig {
                    seed,
                    ..options.tree.clone()
                },
            )),
            BatchAlgorithm::RandomForest => Box::new(RandomForest::new(
                n_features,
                n_classes,
                ForestConfig {
                    seed,
                    ..options.forest.clone()
                },
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAlgorithm(pub String);

impl fmt::Display for UnknownAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown learner `{}`", self.0)
    }
}

impl std::error::Error for UnknownAlgorithm {}

impl FromStr for BatchAlgorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NB" | "GNB" => Ok(BatchAlgorithm::NaiveBayes),
            "LR" => Ok(BatchAlgorithm::LogisticRegression),
            "DT" | "CART" => Ok(BatchAlgorithm::DecisionTree),
            "RF" => Ok(BatchAlgorithm::RandomForest),
            _ => Err(UnknownAlgorithm(s.to_string())),
        }
    }
}

impl fmt::Display for BatchAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl TryFrom<String> for BatchAlgorithm {
    type Error = UnknownAlgorithm;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BatchAlgorithm> for String {
    fn from(a: BatchAlgorithm) -> String {
        a.abbreviation().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OnlineAlgorithm {
    GaussianNb,
    HoeffdingTree,
    LogisticRegression,
}

impl OnlineAlgorithm {
    /// Default online members of a hybrid ensemble.
    pub const DEFAULT_MEMBERS: [OnlineAlgorithm; 3] = [
        OnlineAlgorithm::GaussianNb,
        OnlineAlgorithm::HoeffdingTree,
        OnlineAlgorithm::LogisticRegression,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            OnlineAlgorithm::GaussianNb => "ONB",
            OnlineAlgorithm::HoeffdingTree => "HAT",
            OnlineAlgorithm::LogisticRegression => "OLR",
        }
    }

    pub fn build(
        self,
        n_features: usize,
        n_classes: usize,
        options: &LearnerOptions,
    ) -> Box<dyn OnlineClassifier> {
        match self {
            OnlineAlgorithm::GaussianNb => Box::new(GaussianNb::new(n_features, n_classes)),
            OnlineAlgorithm::HoeffdingTree => Box::new(HoeffdingTree::new(
                n_features,
                n_classes,
                options.hoeffding.clone(),
            )),
            OnlineAlgorithm::LogisticRegression => Box::new(OnlineLogisticRegression::new(
                n_features,
                n_classes,
                options.online_logistic.clone(),
            )),
        }
    }
}

impl FromStr for OnlineAlgorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ONB" | "GNB" => Ok(OnlineAlgorithm::GaussianNb),
            "HAT" | "HT" => Ok(OnlineAlgorithm::HoeffdingTree),
            "OLR" => Ok(OnlineAlgorithm::LogisticRegression),
            _ => Err(UnknownAlgorithm(s.to_string())),
        }
    }
}

impl fmt::Display for OnlineAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl TryFrom<String> for OnlineAlgorithm {
    type Error = UnknownAlgorithm;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<OnlineAlgorithm> for String {
    fn from(a: OnlineAlgorithm) -> String {
        a.abbreviation().to_string()
    }
}
