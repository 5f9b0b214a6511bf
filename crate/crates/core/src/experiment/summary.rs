//! Cross-run aggregation: ranking table and merged traces.

use super::{ExperimentError, REPORT_FILE};
use crate::eval::{rank_methods, RankRow, RunReport, ScoreEntry};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const RANKING_FILE: &str = "ranking.csv";
pub const MERGED_TRACE_FILE: &str = "traces.csv";

/// Every `report.json` below `root`, in path order.
pub fn collect_reports(root: &Path) -> Result<Vec<(PathBuf, RunReport)>, ExperimentError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ExperimentError> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| ExperimentError::io(dir, e))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| ExperimentError::io(dir, e))?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.file_name().is_some_and(|n| n == REPORT_FILE) {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(root, &mut paths)?;
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| ExperimentError::io(&p, e))?;
        let report = RunReport::from_json(&text)
            .map_err(|e| ExperimentError::io(&p, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        reports.push((p, report));
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub ranking: Vec<RankRow>,
    pub n_reports: usize,
}

/// Ranks methods across streams. Several reports for the same
/// (method, stream) cell, e.g. different seeds, are averaged first.
pub fn summarize_reports(reports: &[RunReport]) -> Result<Summary, ExperimentError> {
    let mut cells: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for r in reports {
        let cell = cells.entry((&r.stream_id, &r.method_id)).or_default();
        cell.0 += r.final_f1_macro;
        cell.1 += 1;
    }
    let entries: Vec<ScoreEntry> = cells
        .into_iter()
        .map(|((stream, method), (sum, n))| ScoreEntry::new(stream, method, sum / n as f64))
        .collect();
    Ok(Summary {
        ranking: rank_methods(&entries)?,
        n_reports: reports.len(),
    })
}

#[derive(Serialize)]
struct MergedTraceRow<'a> {
    stream_id: &'a str,
    method_id: &'a str,
    seed: u64,
    seq: u64,
    windowed_f1: f64,
    cumulative_f1: f64,
}

/// Reads the reports under `root`, writes ranking.csv and traces.csv into
/// `out_dir` and returns the ranking.
pub fn write_summary(root: &Path, out_dir: &Path) -> Result<Summary, ExperimentError> {
    let reports: Vec<RunReport> = collect_reports(root)?.into_iter().map(|(_, r)| r).collect();
    if reports.is_empty() {
        return Err(ExperimentError::NoReports(root.to_path_buf()));
    }
    let summary = summarize_reports(&reports)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    let csv_err = |path: &Path, e: csv::Error| ExperimentError::io(path, e.into());

    let ranking_path = out_dir.join(RANKING_FILE);
    let mut w = csv::Writer::from_path(&ranking_path).map_err(|e| csv_err(&ranking_path, e))?;
    for row in &summary.ranking {
        w.serialize(row).map_err(|e| csv_err(&ranking_path, e))?;
    }
    w.flush().map_err(|e| ExperimentError::io(&ranking_path, e))?;

    let trace_path = out_dir.join(MERGED_TRACE_FILE);
    let mut w = csv::Writer::from_path(&trace_path).map_err(|e| csv_err(&trace_path, e))?;
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.stream_id, &a.method_id, a.seed).cmp(&(&b.stream_id, &b.method_id, b.seed)));
    for r in sorted {
        for t in &r.trace {
            w.serialize(MergedTraceRow {
                stream_id: &r.stream_id,
                method_id: &r.method_id,
                seed: r.seed,
                seq: t.seq,
                windowed_f1: t.windowed_f1,
                cumulative_f1: t.cumulative_f1,
            })
            .map_err(|e| csv_err(&trace_path, e))?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(&trace_path, e))?;
    Ok(summary)
}
