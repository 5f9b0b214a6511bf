//! Seeded synthetic streams with controllable concept drift.
//!
//! Each class owns a Gaussian blob; labels are drawn uniformly. A drift
//! re-assigns the blobs to classes by a derangement, so every class moves
//! while the marginal feature distribution stays the same.

use crate::stream::{Instance, Schema};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DriftKind {
    Abrupt,
    /// Means move linearly from the old to the new assignment over `width`
    /// instances.
    Gradual { width: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub at: u64,
    #[serde(flatten)]
    pub kind: DriftKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_instances: u64,
    pub n_features: usize,
    pub n_classes: usize,
    /// Class means are drawn from [-spread, spread]^d.
    pub spread: f64,
    pub class_std: f64,
    pub seed: u64,
    /// Drift points in increasing order of `at`.
    pub drifts: Vec<DriftPoint>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_instances: 10_000,
            n_features: 5,
            n_classes: 3,
            spread: 2.0,
            class_std: 1.0,
            seed: 0,
            drifts: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_features == 0 {
            return Err("n_features must be positive".into());
        }
        if self.n_classes < 2 {
            return Err("n_classes must be at least 2".into());
        }
        if !(self.class_std > 0.0 && self.class_std.is_finite()) {
            return Err("class_std must be positive and finite".into());
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err("spread must be non-negative and finite".into());
        }
        let mut prev_end = 0;
        for d in &self.drifts {
            if d.at < prev_end {
                return Err(format!("drift at {} overlaps the previous drift", d.at));
            }
            prev_end = match d.kind {
                DriftKind::Abrupt => d.at,
                DriftKind::Gradual { width: 0 } => return Err("gradual width must be positive".into()),
                DriftKind::Gradual { width } => d.at + width,
            };
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema::numeric(self.n_features, self.n_classes)
    }
}

/// Random permutation with no fixed points.
fn derangement(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Generates the whole stream. Panics on an invalid config; call
/// [`SynthConfig::validate`] first for user input.
pub fn generate_synthetic(config: &SynthConfig) -> (Schema, Vec<Instance>) {
    config.validate().expect("invalid synthetic config");
    let (d, k) = (config.n_features, config.n_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let blobs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0) * config.spread).collect())
        .collect();

    // assignment[c] = blob used by class c, one per concept
    let mut assignments = vec![(0..k).collect::<Vec<usize>>()];
    for _ in &config.drifts {
        let step = derangement(k, &mut rng);
        let last = assignments.last().unwrap();
        assignments.push(step.iter().map(|&s| last[s]).collect());
    }

    let noise = Normal::new(0.0, config.class_std).expect("validated std");
    let mut out = Vec::with_capacity(config.n_instances as usize);
    let mut concept = 0;
    for seq in 0..config.n_instances {
        while concept < config.drifts.len() && seq >= config.drifts[concept].at {
            concept += 1;
        }
        let y = rng.random_range(0..k);
        let new = &blobs[assignments[concept][y]];
        // fraction of the way into the most recent gradual drift
        let blend = match concept.checked_sub(1).map(|c| config.drifts[c]) {
            Some(DriftPoint { at, kind: DriftKind::Gradual { width } }) if seq < at + width => {
                Some((seq - at) as f64 / width as f64)
            }
            _ => None,
        };
        let x = (0..d)
            .map(|j| {
                let mean = match blend {
                    Some(t) => {
                        let old = blobs[assignments[concept - 1][y]][j];
                        old + t * (new[j] - old)
                    }
                    None => new[j],
                };
                mean + noise.sample(&mut rng)
            })
            .collect();
        out.push(Instance::new(x, y, seq));
    }
    (config.schema(), out)
}
