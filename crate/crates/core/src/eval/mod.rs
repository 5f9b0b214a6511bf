//! Prequential metrics, run reports and the cross-stream ranking.

pub mod metrics;
pub mod ranking;
pub mod report;

pub use metrics::{f1_macro, ConfusionMatrix, MetricError, Prequential, TracePoint, WindowedConfusion};
pub use ranking::{average_ranks_desc, rank_methods, RankRow, RankingError, ScoreEntry};
pub use report::{
    read_events_csv, read_trace_csv, write_events_csv, write_trace_csv, Event, EventKind,
    MemberSummary, RunReport,
};

/// Trace cadence, in instances.
pub const TRACE_EVERY: u64 = 1000;
