//! Two-sample tests and divergences used by the drift monitors.
//!
//! Each function returns a [`TestOutcome`] whose `drift_score` is the value
//! compared against a strategy's threshold: p-value tests signal drift when
//! the score falls *below* the threshold, distance tests when it rises
//! *above* it.

pub mod special;

use crate::stream::FeatureKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Floor applied to the reference standard deviation in the normalized
/// Wasserstein score.
pub const WASSERSTEIN_STD_FLOOR: f64 = 1e-12;
/// Equal-width bins used to discretize numeric samples for JS.
pub const JS_NUMERIC_BINS: usize = 30;
/// Probability mass added to every numeric JS bin before normalization.
pub const JS_BIN_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("{0} sample is empty")]
    Empty(&'static str),
    #[error("{successes} successes out of {n} trials")]
    InvalidProportion { successes: u64, n: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    KolmogorovSmirnov,
    Wasserstein,
    JensenShannon,
    ChiSquared,
    ZProportion,
}

impl TestKind {
    pub fn score_kind(self) -> ScoreKind {
        match self {
            TestKind::Wasserstein | TestKind::JensenShannon => ScoreKind::Distance,
            _ => ScoreKind::PValue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    PValue,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub drift_score: f64,
    pub score_kind: ScoreKind,
}

impl TestOutcome {
    fn p_value(test: TestKind, statistic: f64, p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self {
            test,
            statistic,
            p_value: Some(p),
            drift_score: p,
            score_kind: ScoreKind::PValue,
        }
    }

    fn distance(test: TestKind, statistic: f64, score: f64) -> Self {
        Self {
            test,
            statistic,
            p_value: None,
            drift_score: score,
            score_kind: ScoreKind::Distance,
        }
    }

    /// Applies the threshold convention of this outcome's score kind.
    pub fn is_drift(&self, theta: f64) -> bool {
        match self.score_kind {
            ScoreKind::PValue => self.drift_score < theta,
            ScoreKind::Distance => self.drift_score > theta,
        }
    }
}

fn non_empty(a: &[f64], b: &[f64]) -> Result<(), SampleError> {
    if a.is_empty() {
        return Err(SampleError::Empty("reference"));
    }
    if b.is_empty() {
        return Err(SampleError::Empty("current"));
    }
    Ok(())
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of distinct values in the union of two samples.
pub fn count_unique(a: &[f64], b: &[f64]) -> usize {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|x, y| x.total_cmp(y).is_eq());
    v.len()
}

/// Largest distance between the two empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value at
/// effective size `n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome, SampleError> {
    non_empty(a, b)?;
    let d = ks_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n_eff = na * nb / (na + nb);
    let p = special::kolmogorov_sf(n_eff.sqrt() * d);
    Ok(TestOutcome::p_value(TestKind::KolmogorovSmirnov, d, p))
}

/// First Wasserstein distance between the empirical distributions,
/// `∫ |F_a(t) − F_b(t)| dt`.
pub fn wasserstein_distance(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
    all.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    for w in all.windows(2) {
        let t = w[0];
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        total += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    total
}

/// Wasserstein distance with `drift_score = W₁ / max(reference_std, ε)`.
/// `statistic` keeps the raw distance.
pub fn wasserstein_1d(
    a: &[f64],
    b: &[f64],
    reference_std: f64,
) -> Result<TestOutcome, SampleError> {
    non_empty(a, b)?;
    let w = wasserstein_distance(a, b);
    let score = w / reference_std.max(WASSERSTEIN_STD_FLOOR);
    Ok(TestOutcome::distance(TestKind::Wasserstein, w, score))
}

/// Population standard deviation.
pub fn population_std(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Jensen–Shannon divergence (base 2) of two distributions on the same
/// support. Inputs need not be normalized.
pub fn js_of_distributions(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    let mut js = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let (pi, qi) = (pi / sp, qi / sq);
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            js += 0.5 * pi * (pi / m).log2();
        }
        if qi > 0.0 {
            js += 0.5 * qi * (qi / m).log2();
        }
    }
    js.clamp(0.0, 1.0)
}

fn category_counts(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut counts: BTreeMap<OrdF64, (f64, f64)> = BTreeMap::new();
    for &v in a {
        counts.entry(OrdF64(v)).or_default().0 += 1.0;
    }
    for &v in b {
        counts.entry(OrdF64(v)).or_default().1 += 1.0;
    }
    counts.into_values().unzip()
}

#[derive(Debug, Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn binned_counts(a: &[f64], b: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let bin = |v: f64| -> usize {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        }
    };
    let mut ca = vec![JS_BIN_SMOOTHING; bins];
    let mut cb = vec![JS_BIN_SMOOTHING; bins];
    let (na, nb) = (a.len() as f64, b.len() as f64);
    for &v in a {
        ca[bin(v)] += 1.0 / na;
    }
    for &v in b {
        cb[bin(v)] += 1.0 / nb;
    }
    (ca, cb)
}

/// `sqrt(JS)` (base 2) between the two samples. Categorical and binary
/// samples use their observed values as support; numeric samples are
/// discretized into [`JS_NUMERIC_BINS`] equal-width bins over the pooled
/// range.
pub fn js_divergence(a: &[f64], b: &[f64], kind: FeatureKind) -> Result<TestOutcome, SampleError> {
    non_empty(a, b)?;
    let (p, q) = match kind {
        FeatureKind::Numeric => binned_counts(a, b, JS_NUMERIC_BINS),
        FeatureKind::Categorical | FeatureKind::Binary => category_counts(a, b),
    };
    let d = js_of_distributions(&p, &q).sqrt();
    Ok(TestOutcome::distance(TestKind::JensenShannon, d, d))
}

/// Goodness-of-fit of the current sample against the reference category
/// proportions. When some category of the union is missing from the
/// reference, 0.5 is added to every reference count so no expected count is
/// zero.
pub fn chi_squared(a: &[f64], b: &[f64]) -> Result<TestOutcome, SampleError> {
    non_empty(a, b)?;
    let (mut ra, cb) = category_counts(a, b);
    Ok(chi_squared_counts(&mut ra, &cb))
}

/// Chi-squared statistic and p-value from aligned reference/current counts.
/// `reference` is smoothed in place when it contains a zero.
pub fn chi_squared_counts(reference: &mut [f64], current: &[f64]) -> TestOutcome {
    let k = reference.len();
    if k < 2 {
        return TestOutcome::p_value(TestKind::ChiSquared, 0.0, 1.0);
    }
    if reference.iter().any(|&c| c == 0.0) {
        reference.iter_mut().for_each(|c| *c += 0.5);
    }
    let total_ref: f64 = reference.iter().sum();
    let total_cur: f64 = current.iter().sum();
    let stat: f64 = reference
        .iter()
        .zip(current)
        .map(|(&r, &o)| {
            let e = r / total_ref * total_cur;
            (o - e).powi(2) / e
        })
        .sum();
    let df = (k - 1) as f64;
    let p = special::gamma_q(df / 2.0, stat / 2.0);
    TestOutcome::p_value(TestKind::ChiSquared, stat, p)
}

/// Pooled two-proportion Z test, two-sided. `statistic` is the signed z.
pub fn z_proportion(
    successes_a: u64,
    n_a: u64,
    successes_b: u64,
    n_b: u64,
) -> Result<TestOutcome, SampleError> {
    if n_a == 0 {
        return Err(SampleError::Empty("reference"));
    }
    if n_b == 0 {
        return Err(SampleError::Empty("current"));
    }
    for (s, n) in [(successes_a, n_a), (successes_b, n_b)] {
        if s > n {
            return Err(SampleError::InvalidProportion { successes: s, n });
        }
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let pooled = (successes_a + successes_b) as f64 / (na + nb);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Ok(TestOutcome::p_value(TestKind::ZProportion, 0.0, 1.0));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let z = (successes_a as f64 / na - successes_b as f64 / nb) / se;
    let p = 2.0 * special::normal_sf(z.abs());
    Ok(TestOutcome::p_value(TestKind::ZProportion, z, p))
}

/// Z test on two samples of a two-valued column; the larger of the observed
/// values counts as a success.
pub fn z_proportion_samples(a: &[f64], b: &[f64]) -> Result<TestOutcome, SampleError> {
    non_empty(a, b)?;
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let count = |s: &[f64]| s.iter().filter(|&&v| v == hi).count() as u64;
    z_proportion(count(a), a.len() as u64, count(b), b.len() as u64)
}
