use super::metrics::TracePoint;
use serde::{Deserialize, Serialize};
use std::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Drift,
    Replace,
}

/// One row of the drift/replacement log. A drift verdict with several
/// triggers produces one row per trigger, all sharing `seq` and `member`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub member: String,
    pub event: EventKind,
    /// `feature:<name>`, `target` or `performance` for drifts; `shadow` for
    /// replacements.
    pub source: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub id: String,
    pub drift_count: u64,
    pub replacement_count: u64,
}

/// Outcome of one run. Serialized as a single JSON line; contains nothing
/// time-dependent so equal inputs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub stream_id: String,
    pub method_id: String,
    pub seed: u64,
    pub config_digest: String,
    pub n_instances: u64,
    pub final_f1_macro: f64,
    /// Summed over all members.
    pub drift_count: u64,
    pub replacement_count: u64,
    pub members: Vec<MemberSummary>,
    pub trace: Vec<TracePoint>,
}

impl RunReport {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s.trim())
    }
}

pub fn write_trace_csv<W: io::Write>(w: W, trace: &[TracePoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seq", "windowed_f1", "cumulative_f1"])?;
    for p in trace {
        out.serialize((p.seq, p.windowed_f1, p.cumulative_f1))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: io::Read>(r: R) -> csv::Result<Vec<TracePoint>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn write_events_csv<W: io::Write>(w: W, events: &[Event]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if events.is_empty() {
        out.write_record(["seq", "member", "event", "source", "score"])?;
    }
    // the header comes from the field names otherwise
    for e in events {
        out.serialize(e)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_events_csv<R: io::Read>(r: R) -> csv::Result<Vec<Event>> {
    csv::Reader::from_reader(r).deserialize().collect()
}
