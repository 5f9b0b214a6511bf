//! Raw CSV → canonical stream: chronological sort, column dropping,
//! one-hot encoding of categoricals and mode imputation of numerics.

use super::format::{is_canonical, read_stream, write_stream};
use super::IngestError;
use crate::stream::{FeatureDescriptor, FeatureKind, Instance, Schema};
use chrono::{NaiveDate, NaiveDateTime};
use log::info;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

/// Field values treated as missing.
pub const MISSING_MARKERS: [&str; 4] = ["", "?", "NA", "NaN"];

pub fn is_missing(field: &str) -> bool {
    MISSING_MARKERS.contains(&field.trim())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub target_column: String,
    /// Sort keys, most significant first.
    pub datetime_columns: Vec<String>,
    /// chrono format for the datetime columns; without one they are
    /// compared as text (correct for ISO-8601).
    pub datetime_format: Option<String>,
    pub categorical_columns: Vec<String>,
    pub drop_columns: Vec<String>,
    pub missing_category_label: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_column: String::new(),
            datetime_columns: Vec::new(),
            datetime_format: None,
            categorical_columns: Vec::new(),
            drop_columns: Vec::new(),
            missing_category_label: "Don't know / Refuse to answer".to_string(),
        }
    }
}

impl IngestConfig {
    pub fn new(target_column: impl Into<String>) -> Self {
        Self {
            target_column: target_column.into(),
            ..Self::default()
        }
    }

    fn validate(&self, header: &[String]) -> Result<(), IngestError> {
        if self.target_column.is_empty() {
            return Err(IngestError::Config("target_column is not set".into()));
        }
        let has = |c: &String| header.contains(c);
        if !has(&self.target_column) {
            return Err(IngestError::Config(format!(
                "target column `{}` not found in header",
                self.target_column
            )));
        }
        if self.drop_columns.contains(&self.target_column) {
            return Err(IngestError::Config(format!(
                "target column `{}` is also listed in drop_columns",
                self.target_column
            )));
        }
        for (what, cols) in [
            ("datetime", &self.datetime_columns),
            ("categorical", &self.categorical_columns),
            ("drop", &self.drop_columns),
        ] {
            if let Some(c) = cols.iter().find(|c| !has(c)) {
                return Err(IngestError::Config(format!("{what} column `{c}` not found in header")));
            }
        }
        let mut seen = HashSet::new();
        if let Some(dup) = header.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(IngestError::Config(format!("duplicate column `{dup}` in header")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub schema: Schema,
    pub n_rows: usize,
    /// Rows dropped because their target was missing.
    pub n_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SortKey {
    Time(NaiveDateTime),
    Text(String),
}

fn parse_datetime(s: &str, format: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, format).ok().or_else(|| {
        NaiveDate::parse_from_str(s, format)
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
    })
}

/// Most frequent value; ties resolve to the smallest value.
pub fn mode(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if best.is_none_or(|(_, n)| j - i > n) {
            best = Some((v[i], j - i));
        }
        i = j;
    }
    best.map(|(value, _)| value)
}

enum ColumnPlan {
    Numeric { name: String, values: Vec<f64> },
    Categorical { name: String, categories: Vec<String>, codes: Vec<usize> },
}

/// Encodes a raw CSV into a schema and an instance list.
pub fn encode_csv<R: Read>(
    reader: R,
    config: &IngestConfig,
) -> Result<(Schema, Vec<Instance>, usize), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    config.validate(&header)?;
    let col = |name: &str| header.iter().position(|h| h == name).expect("validated");
    let target = col(&config.target_column);

    // (line number, fields) of rows with a target
    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    let mut excluded = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if is_missing(&rec[target]) {
            excluded += 1;
            continue;
        }
        rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }
    if rows.is_empty() {
        return Err(IngestError::NoRows);
    }

    if !config.datetime_columns.is_empty() {
        let key_cols: Vec<usize> = config.datetime_columns.iter().map(|c| col(c)).collect();
        let mut keyed = Vec::with_capacity(rows.len());
        for (line, fields) in rows {
            let mut key = Vec::with_capacity(key_cols.len());
            for &k in &key_cols {
                let raw = &fields[k];
                let part = if is_missing(raw) {
                    // missing timestamps sort last
                    None
                } else if let Some(fmt) = &config.datetime_format {
                    let t = parse_datetime(raw, fmt).ok_or_else(|| IngestError::Decode {
                        line,
                        message: format!("`{raw}` does not match datetime format `{fmt}`"),
                    })?;
                    Some(SortKey::Time(t))
                } else {
                    Some(SortKey::Text(raw.clone()))
                };
                key.push((part.is_none(), part));
            }
            keyed.push((key, line, fields));
        }
        // stable: equal timestamps keep file order
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        rows = keyed.into_iter().map(|(_, line, fields)| (line, fields)).collect();
    }

    let mut class_labels: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let ys: Vec<usize> = rows
        .iter()
        .map(|(_, f)| {
            let label = &f[target];
            *class_index.entry(label.clone()).or_insert_with(|| {
                class_labels.push(label.clone());
                class_labels.len() - 1
            })
        })
        .collect();

    let skip: HashSet<usize> = config
        .drop_columns
        .iter()
        .chain(&config.datetime_columns)
        .map(|c| col(c))
        .chain([target])
        .collect();
    let mut plans = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if skip.contains(&j) {
            continue;
        }
        let values: Vec<&str> = rows.iter().map(|(_, f)| f[j].as_str()).collect();
        let explicit = config.categorical_columns.contains(name);
        let parsed: Option<Vec<Option<f64>>> = if explicit {
            None
        } else {
            values
                .iter()
                .map(|v| if is_missing(v) { Some(None) } else { v.parse::<f64>().ok().map(Some) })
                .collect()
        };
        match parsed {
            Some(parsed) => {
                let observed: Vec<f64> = parsed.iter().flatten().copied().collect();
                let fill = mode(&observed).unwrap_or_else(|| {
                    info!("column `{name}` has no values; filling with 0");
                    0.0
                });
                let values = parsed.into_iter().map(|v| v.unwrap_or(fill)).collect();
                plans.push(ColumnPlan::Numeric {
                    name: name.clone(),
                    values,
                });
            }
            None => {
                if !explicit {
                    info!("column `{name}` is not numeric; one-hot encoding it");
                }
                let mut categories: Vec<String> = Vec::new();
                let mut index: HashMap<&str, usize> = HashMap::new();
                let codes = values
                    .iter()
                    .map(|v| {
                        let v = if is_missing(v) {
                            config.missing_category_label.as_str()
                        } else {
                            v
                        };
                        *index.entry(v).or_insert_with(|| {
                            categories.push(v.to_string());
                            categories.len() - 1
                        })
                    })
                    .collect();
                plans.push(ColumnPlan::Categorical {
                    name: name.clone(),
                    categories,
                    codes,
                });
            }
        }
    }

    let mut features = Vec::new();
    for plan in &plans {
        match plan {
            ColumnPlan::Numeric { name, values } => {
                let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
                let kind = if binary { FeatureKind::Binary } else { FeatureKind::Numeric };
                features.push(FeatureDescriptor::new(name.clone(), kind));
            }
            ColumnPlan::Categorical { name, categories, .. } => {
                for c in categories {
                    let mut f = FeatureDescriptor::new(format!("{name}={c}"), FeatureKind::Binary);
                    f.group = Some(name.clone());
                    features.push(f);
                }
            }
        }
    }
    let schema = Schema::new(features, class_labels)?.with_target(config.target_column.clone());
    let instances = ys
        .into_iter()
        .enumerate()
        .map(|(r, y)| {
            let mut x = Vec::with_capacity(schema.n_features());
            for plan in &plans {
                match plan {
                    ColumnPlan::Numeric { values, .. } => x.push(values[r]),
                    ColumnPlan::Categorical { categories, codes, .. } => {
                        x.extend((0..categories.len()).map(|c| (codes[r] == c) as u8 as f64))
                    }
                }
            }
            Instance::new(x, y, r as u64)
        })
        .collect();
    Ok((schema, instances, excluded))
}

/// Encodes `raw` into a canonical stream at `out`. A file that is already
/// canonical is re-emitted unchanged.
pub fn preprocess_csv(
    raw: &Path,
    config: &IngestConfig,
    out: &Path,
) -> Result<PreprocessSummary, IngestError> {
    let (schema, instances, n_excluded) = if is_canonical(raw)? {
        let (schema, instances) = read_stream(raw)?;
        let schema = schema.expect("canonical file has a schema");
        (schema, instances, 0)
    } else {
        encode_csv(std::fs::File::open(raw)?, config)?
    };
    if instances.is_empty() {
        return Err(IngestError::NoRows);
    }
    write_stream(out, &schema, &instances)?;
    Ok(PreprocessSummary {
        schema,
        n_rows: instances.len(),
        n_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(csv: &str, config: &IngestConfig) -> (Schema, Vec<Instance>, usize) {
        encode_csv(csv.as_bytes(), config).unwrap()
    }

    #[test]
    fn one_hot_encoding() {
        let (schema, inst, _) = encode("color,y\nred,a\nblue,b\nred,a\n", &IngestConfig::new("y"));
        let names: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["color=red", "color=blue"]);
        let rows: Vec<&[f64]> = inst.iter().map(|i| i.x.as_slice()).collect();
        assert_eq!(rows, [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert!(schema.features().iter().all(|f| f.kind == FeatureKind::Binary));
    }

    #[test]
    fn numeric_mode_imputation() {
        let (_, inst, _) = encode("v,y\n5,a\n?,a\n5,b\n7,b\n", &IngestConfig::new("y"));
        let v: Vec<f64> = inst.iter().map(|i| i.x[0]).collect();
        assert_eq!(v, [5.0, 5.0, 5.0, 7.0]);
        assert_eq!(mode(&[3.0, 1.0, 3.0, 1.0]), Some(1.0));
        assert_eq!(mode(&[]), None);
    }

    #[test]
    fn rows_without_target_are_excluded() {
        let (schema, inst, excluded) = encode("v,y\n1,a\n2,\n3,b\n", &IngestConfig::new("y"));
        assert_eq!((inst.len(), excluded), (2, 1));
        assert_eq!(schema.class_labels(), ["a", "b"]);
    }

    #[test]
    fn missing_categories_get_their_own_column() {
        let mut config = IngestConfig::new("y");
        config.categorical_columns = vec!["q".into()];
        let (schema, inst, _) = encode("q,y\n1,a\nNA,b\n2,a\n", &config);
        let names: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["q=1", "q=Don't know / Refuse to answer", "q=2"]);
        for i in &inst {
            assert_eq!(i.x.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn chronological_sort_and_drops() {
        let mut config = IngestConfig::new("y");
        config.datetime_columns = vec!["when".into()];
        config.datetime_format = Some("%d/%m/%Y".into());
        config.drop_columns = vec!["leak".into()];
        let csv = "when,leak,v,y\n02/01/2020,9,2,b\n01/01/2020,9,1,a\n01/02/2019,9,0,c\n";
        let (schema, inst, _) = encode(csv, &config);
        assert_eq!(schema.n_features(), 1);
        let v: Vec<f64> = inst.iter().map(|i| i.x[0]).collect();
        assert_eq!(v, [0.0, 1.0, 2.0]);
        // class catalogue follows the sorted order
        assert_eq!(schema.class_labels(), ["c", "a", "b"]);
        assert_eq!(inst.iter().map(|i| i.seq).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn bad_datetime_reports_line() {
        let mut config = IngestConfig::new("y");
        config.datetime_columns = vec!["when".into()];
        config.datetime_format = Some("%Y-%m-%d".into());
        let err = encode_csv("when,y\n2020-01-01,a\nyesterday,b\n".as_bytes(), &config).unwrap_err();
        assert!(matches!(err, IngestError::Decode { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn config_errors() {
        let err = encode_csv("a,b\n1,2\n".as_bytes(), &IngestConfig::new("label")).unwrap_err();
        assert!(err.to_string().contains("label"));
        let mut c = IngestConfig::new("b");
        c.drop_columns = vec!["b".into()];
        assert!(matches!(encode_csv("a,b\n1,2\n".as_bytes(), &c), Err(IngestError::Config(_))));
        assert!(matches!(
            encode_csv("a,b\n1,\n".as_bytes(), &IngestConfig::new("b")),
            Err(IngestError::NoRows)
        ));
    }
}
