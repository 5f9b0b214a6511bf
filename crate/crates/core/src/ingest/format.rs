//! Canonical stream files.
//!
//! ```text
//! #hybridstream-stream v1
//! #schema {"features":[...],"class_labels":[...],"target":"..."}
//! x0,x1,...,target
//! 0.5,1,...,label
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so
//! reading a file and writing it back reproduces it byte for byte.

use super::IngestError;
use crate::stream::{Instance, Schema};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &str = "#hybridstream-stream v1";
const SCHEMA_PREFIX: &str = "#schema ";

pub struct StreamWriter<W: Write> {
    out: csv::Writer<W>,
    schema: Schema,
    row: Vec<String>,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(mut w: W, schema: &Schema) -> Result<Self, IngestError> {
        schema.validate()?;
        writeln!(w, "{MAGIC}")?;
        let json = serde_json::to_string(schema).expect("schema serializes");
        writeln!(w, "{SCHEMA_PREFIX}{json}")?;
        let mut out = csv::WriterBuilder::new().from_writer(w);
        let mut header: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
        header.push(schema.target());
        out.write_record(&header)?;
        Ok(Self {
            out,
            schema: schema.clone(),
            row: Vec::with_capacity(schema.n_features() + 1),
        })
    }

    pub fn write(&mut self, inst: &Instance) -> Result<(), IngestError> {
        self.schema.check_instance(inst)?;
        self.row.clear();
        self.row.extend(inst.x.iter().map(|v| v.to_string()));
        self.row.push(self.schema.class_labels()[inst.y].clone());
        self.out.write_record(&self.row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IngestError> {
        self.out.flush()?;
        self.out
            .into_inner()
            .map_err(|e| IngestError::Io(io::Error::other(e.to_string())))
    }
}

/// Writes a whole stream to `path`.
pub fn write_stream<'a>(
    path: &Path,
    schema: &Schema,
    instances: impl IntoIterator<Item = &'a Instance>,
) -> Result<(), IngestError> {
    let file = File::create(path)?;
    let mut w = StreamWriter::new(BufWriter::new(file), schema)?;
    for inst in instances {
        w.write(inst)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

/// Streaming reader; yields instances with `seq` equal to their position.
pub struct StreamReader<R: Read> {
    schema: Option<Schema>,
    records: Option<csv::StringRecordsIntoIter<BufReader<R>>>,
    seq: u64,
}

impl StreamReader<File> {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        Self::new(File::open(path)?)
    }
}

fn first_line_is_magic(line: &str) -> bool {
    line.trim_end_matches(['\r', '\n']) == MAGIC
}

/// Whether `path` starts with the canonical stream marker.
pub fn is_canonical(path: &Path) -> Result<bool, IngestError> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(first_line_is_magic(&line))
}

impl<R: Read> StreamReader<R> {
    /// A completely empty input is an empty stream without a schema.
    pub fn new(r: R) -> Result<Self, IngestError> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Ok(Self {
                schema: None,
                records: None,
                seq: 0,
            });
        }
        if !first_line_is_magic(&line) {
            return Err(IngestError::Decode {
                line: 1,
                message: format!("expected `{MAGIC}`"),
            });
        }
        line.clear();
        r.read_line(&mut line)?;
        let json = line
            .trim_end_matches(['\r', '\n'])
            .strip_prefix(SCHEMA_PREFIX)
            .ok_or_else(|| IngestError::Decode {
                line: 2,
                message: "expected `#schema <json>`".into(),
            })?;
        let schema: Schema = serde_json::from_str(json).map_err(|e| IngestError::Decode {
            line: 2,
            message: e.to_string(),
        })?;
        schema.validate()?;
        let mut csv_reader = csv::ReaderBuilder::new().from_reader(r);
        let header = csv_reader.headers()?.clone();
        let expected: Vec<&str> = schema
            .features()
            .iter()
            .map(|f| f.name.as_str())
            .chain([schema.target()])
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(IngestError::Decode {
                line: 3,
                message: "column header does not match the schema".into(),
            });
        }
        Ok(Self {
            schema: Some(schema),
            records: Some(csv_reader.into_records()),
            seq: 0,
        })
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.schema.as_ref()
    }

    fn decode(&self, record: &csv::StringRecord) -> Result<Instance, IngestError> {
        let schema = self.schema.as_ref().expect("records imply a schema");
        // header lines + 1-based row
        let line = self.seq + 4;
        let d = schema.n_features();
        if record.len() != d + 1 {
            return Err(IngestError::Decode {
                line,
                message: format!("expected {} fields, found {}", d + 1, record.len()),
            });
        }
        let mut x = Vec::with_capacity(d);
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| IngestError::Decode {
                line,
                message: format!("column `{}`: `{field}` is not a number", schema.features()[j].name),
            })?;
            x.push(v);
        }
        let label = &record[d];
        let y = schema.class_index(label).ok_or_else(|| IngestError::Decode {
            line,
            message: format!("unknown class label `{label}`"),
        })?;
        Ok(Instance::new(x, y, self.seq))
    }
}

impl<R: Read> Iterator for StreamReader<R> {
    type Item = Result<Instance, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = match self.records.as_mut()?.next()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e.into())),
        };
        let out = self.decode(&record);
        self.seq += 1;
        Some(out)
    }
}

/// Reads a whole stream into memory.
pub fn read_stream(path: &Path) -> Result<(Option<Schema>, Vec<Instance>), IngestError> {
    let reader = StreamReader::open(path)?;
    let schema = reader.schema().cloned();
    let instances = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((schema, instances))
}
