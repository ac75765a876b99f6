//! Deterministic serialization of pipeline reports.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::{CliError, Format};

/// A report in both output shapes: a JSON value (or JSON lines) and a table.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub json: Body,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Document(Value),
    Lines(Vec<Value>),
}

impl Artifact {
    pub fn table<T: Serialize>(report: &T, header: &[&str], rows: Vec<Vec<String>>) -> Result<Self, CliError> {
        Ok(Self {
            json: Body::Document(to_sorted_value(report)?),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        })
    }

    pub fn lines<T: Serialize>(records: &[T], header: &[&str], rows: Vec<Vec<String>>) -> Result<Self, CliError> {
        Ok(Self {
            json: Body::Lines(records.iter().map(to_sorted_value).collect::<Result<_, _>>()?),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        })
    }
}

/// 17 significant digits, `.` as decimal separator.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn to_sorted_value<T: Serialize>(report: &T) -> Result<Value, CliError> {
    let v = serde_json::to_value(report).map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    Ok(sort_keys(v))
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn render(artifact: &Artifact, format: Format) -> Result<Vec<u8>, CliError> {
    let ser = |e: serde_json::Error| CliError::Io(format!("serializing report: {e}"));
    match format {
        Format::Json => match &artifact.json {
            Body::Document(v) => {
                let mut out = serde_json::to_vec_pretty(v).map_err(ser)?;
                out.push(b'\n');
                Ok(out)
            }
            Body::Lines(records) => {
                let mut out = Vec::new();
                for r in records {
                    out.extend(serde_json::to_vec(r).map_err(ser)?);
                    out.push(b'\n');
                }
                Ok(out)
            }
        },
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Io(format!("writing csv: {e}"));
            w.write_record(&artifact.header).map_err(csv_err)?;
            for row in &artifact.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| CliError::Io(format!("writing csv: {e}")))
        }
    }
}

/// Writes the report to `path`, or to stdout when no path is given.
pub fn emit_report(artifact: &Artifact, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(artifact, format)?;
    let io_err = |e: io::Error| {
        let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
        CliError::Io(format!("{target}: {e}"))
    };
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).map_err(io_err)?);
            f.write_all(&bytes).map_err(io_err)?;
            f.flush().map_err(io_err)
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes).map_err(io_err)?;
            out.flush().map_err(io_err)
        }
    }
}
