//! Getting data into canonical streams: CSV preprocessing, the canonical
//! file format and synthetic generators.

mod format;
mod preprocess;
mod synth;

pub use format::{is_canonical, read_stream, write_stream, StreamReader, StreamWriter, MAGIC};
pub use preprocess::{
    encode_csv, is_missing, mode, preprocess_csv, IngestConfig, PreprocessSummary, MISSING_MARKERS,
};
pub use synth::{generate_synthetic, DriftKind, DriftPoint, SynthConfig};

use crate::stream::SchemaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Decode { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(#[from] SchemaError),
    #[error("invalid ingest config: {0}")]
    Config(String),
    #[error("no usable rows")]
    NoRows,
}
