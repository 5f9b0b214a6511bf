//! End-to-end experiments: a declarative config names a stream and a
//! method; running it produces a [`RunReport`], a metric trace and the
//! drift/replacement log.

mod method;
mod summary;

pub use method::{MethodSpec, StrategyOverrides, DEFAULT_ENSEMBLE_STRATEGIES};
pub use summary::{collect_reports, summarize_reports, write_summary, Summary};

use crate::ensemble::{Ensemble, EnsembleConfig, EnsembleError};
use crate::eval::{
    write_events_csv, write_trace_csv, Event, RankingError, RunReport, TracePoint, TRACE_EVERY,
};
use crate::ingest::{generate_synthetic, IngestError, StreamReader, SynthConfig};
use crate::learners::LearnerOptions;
use crate::stream::{Instance, Schema};
use log::{debug, info};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error("{} already exists; pass --force to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("no {REPORT_FILE} found under {}", .0.display())]
    NoReports(PathBuf),
    #[error("stream `{0}` has no instances")]
    EmptyStream(String),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for usage/config problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::OutputExists(_) => 1,
            ExperimentError::Ingest(IngestError::Config(_)) => 1,
            ExperimentError::Ensemble(EnsembleError::OutOfOrder { .. } | EnsembleError::Schema(_)) => 2,
            ExperimentError::Ensemble(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StreamSource {
    /// A canonical stream file; relative paths resolve against the config
    /// file's directory.
    Path(PathBuf),
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamSource,
    /// Defaults to the stream file stem, or `synthetic` for generated streams.
    #[serde(default)]
    pub stream_id: Option<String>,
    #[serde(deserialize_with = "method::deserialize_method")]
    pub method: MethodSpec,
    /// Defaults to [`MethodSpec::id`].
    #[serde(default)]
    pub method_id: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: StrategyOverrides,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub learners: LearnerOptions,
    /// Run directory; the CLI's `--out` takes precedence. Not part of the
    /// digest.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(stream: StreamSource, method: MethodSpec) -> Self {
        Self {
            stream,
            stream_id: None,
            method,
            method_id: None,
            seed: 0,
            overrides: StrategyOverrides::default(),
            ensemble: EnsembleConfig::default(),
            learners: LearnerOptions::default(),
            output: None,
        }
    }

    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut config: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if let StreamSource::Path(p) = &mut config.stream {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        if let Some(out) = &mut config.output {
            if out.is_relative() {
                *out = base_dir.join(&*out);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.method.validate(&self.overrides).map_err(ExperimentError::Config)?;
        if let StreamSource::Synthetic(s) = &self.stream {
            s.validate().map_err(ExperimentError::Config)?;
        }
        Ok(())
    }

    pub fn stream_id(&self) -> String {
        match (&self.stream_id, &self.stream) {
            (Some(id), _) => id.clone(),
            (None, StreamSource::Path(p)) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "stream".into()),
            (None, StreamSource::Synthetic(_)) => "synthetic".into(),
        }
    }

    pub fn method_id(&self) -> String {
        self.method_id.clone().unwrap_or_else(|| self.method.id())
    }

    /// SHA-256 over the canonical JSON form of everything that affects the
    /// result.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn run_id(&self) -> String {
        format!("{}/{}/seed{}", self.stream_id(), self.method_id(), self.seed)
    }

    /// Ensemble built for `schema`, before any instance is seen.
    pub fn build_ensemble(&self, schema: &Schema) -> Result<Ensemble, ExperimentError> {
        let members = self
            .method
            .build_members(schema, &self.overrides, &self.ensemble, &self.learners, self.seed)
            .map_err(ExperimentError::Config)?;
        let config = EnsembleConfig {
            combiner: self.method.combiner(),
            ..self.ensemble.clone()
        };
        Ok(Ensemble::new(schema.clone(), config, members)?)
    }
}

/// Reads a TOML file into any config type (ingest, synthetic, experiment
/// sections).
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    toml::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub events: Vec<Event>,
    pub wall_time: Duration,
}

/// Runs the experiment on the configured stream.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    match &config.stream {
        StreamSource::Path(path) => {
            let reader = StreamReader::open(path).map_err(|e| match e {
                IngestError::Io(io) => ExperimentError::io(path, io),
                other => other.into(),
            })?;
            let schema = reader
                .schema()
                .cloned()
                .ok_or_else(|| ExperimentError::EmptyStream(config.stream_id()))?;
            run_on_stream(config, &schema, reader)
        }
        StreamSource::Synthetic(synth) => {
            let (schema, instances) = generate_synthetic(synth);
            run_on_stream(config, &schema, instances.into_iter().map(Ok))
        }
    }
}

/// Runs the experiment on an explicit instance source. The ensemble is
/// built before the first instance is read, so config errors surface
/// without touching the data.
pub fn run_on_stream(
    config: &ExperimentConfig,
    schema: &Schema,
    instances: impl IntoIterator<Item = Result<Instance, IngestError>>,
) -> Result<RunOutput, ExperimentError> {
    let started = Instant::now();
    let mut ensemble = config.build_ensemble(schema)?;
    info!(
        "running {} on {} ({} members)",
        config.method_id(),
        config.stream_id(),
        ensemble.members().len()
    );
    let mut events = Vec::new();
    let mut trace = Vec::new();
    for inst in instances {
        let step = ensemble.process_instance(&inst?)?;
        for e in &step.events {
            debug!("{} {:?} {} {} {:.4}", e.seq, e.event, e.member, e.source, e.score);
        }
        events.extend(step.events);
        let n = ensemble.metrics().n_seen();
        if n % TRACE_EVERY == 0 {
            trace.push(TracePoint {
                seq: n,
                windowed_f1: ensemble.metrics().windowed_f1(),
                cumulative_f1: ensemble.metrics().cumulative_f1(),
            });
            if n % (TRACE_EVERY * 10) == 0 {
                info!("{n} instances, cumulative F1 {:.4}", ensemble.metrics().cumulative_f1());
            }
        }
    }
    let n_instances = ensemble.metrics().n_seen();
    if n_instances == 0 {
        return Err(ExperimentError::EmptyStream(config.stream_id()));
    }
    let report = RunReport {
        run_id: config.run_id(),
        stream_id: config.stream_id(),
        method_id: config.method_id(),
        seed: config.seed,
        config_digest: config.digest(),
        n_instances,
        final_f1_macro: ensemble.metrics().cumulative_f1(),
        drift_count: ensemble.drift_count(),
        replacement_count: ensemble.replacement_count(),
        members: ensemble.member_summaries(),
        trace,
    };
    Ok(RunOutput {
        report,
        events,
        wall_time: started.elapsed(),
    })
}

/// Writes report.json, trace.csv, events.csv and timing.json into `dir`.
pub fn write_run_outputs(dir: &Path, output: &RunOutput, force: bool) -> Result<(), ExperimentError> {
    let report_path = dir.join(REPORT_FILE);
    if report_path.exists() && !force {
        return Err(ExperimentError::OutputExists(report_path));
    }
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let write = |name: &str, bytes: Vec<u8>| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| ExperimentError::io(&path, e))
    };
    let csv_err = |name: &str, e: csv::Error| ExperimentError::io(&dir.join(name), e.into());

    let mut trace = Vec::new();
    write_trace_csv(&mut trace, &output.report.trace).map_err(|e| csv_err(TRACE_FILE, e))?;
    let mut events = Vec::new();
    write_events_csv(&mut events, &output.events).map_err(|e| csv_err(EVENTS_FILE, e))?;
    let timing = serde_json::json!({
        "run_id": output.report.run_id,
        "wall_time_secs": output.wall_time.as_secs_f64(),
    });
    write(TRACE_FILE, trace)?;
    write(EVENTS_FILE, events)?;
    write(TIMING_FILE, format!("{timing}\n").into_bytes())?;
    // last, so a present report means a complete run directory
    write(REPORT_FILE, output.report.to_json_line().into_bytes())
}
