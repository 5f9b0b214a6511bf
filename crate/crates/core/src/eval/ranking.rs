//! Cross-stream ranking: methods are ranked by F1 on every stream and
//! ordered by their mean rank.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("no results to rank")]
    Empty,
    #[error("missing results for {}", format_cells(.0))]
    Missing(Vec<(String, String)>),
    #[error("duplicate result for method `{method}` on stream `{stream}`")]
    Duplicate { method: String, stream: String },
}

fn format_cells(cells: &[(String, String)]) -> String {
    cells
        .iter()
        .map(|(m, s)| format!("(method `{m}`, stream `{s}`)"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub stream: String,
    pub method: String,
    pub f1: f64,
}

impl ScoreEntry {
    pub fn new(stream: impl Into<String>, method: impl Into<String>, f1: f64) -> Self {
        Self {
            stream: stream.into(),
            method: method.into(),
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub position: usize,
    pub method: String,
    /// Mean rank across streams.
    pub score: f64,
}

/// Ranks of `values` sorted descending, 1-based; tied values share the
/// average of the positions they occupy.
pub fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Requires every method to have exactly one result on every stream.
/// Positions follow ascending score; equal scores are ordered by method
/// name so the table is stable.
pub fn rank_methods(entries: &[ScoreEntry]) -> Result<Vec<RankRow>, RankingError> {
    if entries.is_empty() {
        return Err(RankingError::Empty);
    }
    let mut grid: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut methods: BTreeSet<&str> = BTreeSet::new();
    for e in entries {
        methods.insert(&e.method);
        if grid
            .entry(&e.stream)
            .or_default()
            .insert(&e.method, e.f1)
            .is_some()
        {
            return Err(RankingError::Duplicate {
                method: e.method.clone(),
                stream: e.stream.clone(),
            });
        }
    }
    let mut missing = Vec::new();
    for m in &methods {
        for (s, row) in &grid {
            if !row.contains_key(m) {
                missing.push((m.to_string(), s.to_string()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(RankingError::Missing(missing));
    }
    let mut totals: BTreeMap<&str, f64> = methods.iter().map(|&m| (m, 0.0)).collect();
    for row in grid.values() {
        let names: Vec<&str> = row.keys().copied().collect();
        let values: Vec<f64> = row.values().copied().collect();
        for (m, r) in names.into_iter().zip(average_ranks_desc(&values)) {
            *totals.get_mut(m).expect("known method") += r;
        }
    }
    let n_streams = grid.len() as f64;
    let mut rows: Vec<RankRow> = totals
        .into_iter()
        .map(|(m, t)| RankRow {
            position: 0,
            method: m.to_string(),
            score: t / n_streams,
        })
        .collect();
    rows.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.method.cmp(&b.method)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.position = i + 1;
    }
    Ok(rows)
}
