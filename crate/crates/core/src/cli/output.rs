use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{ExperimentConfig, OutputFormat};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
}

impl Cell {
    /// 17 significant digits, so every `f64` survives a text round trip.
    fn to_text(self) -> String {
        match self {
            Cell::Real(x) if x.is_nan() => "NaN".into(),
            Cell::Real(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
        }
    }

    fn to_json(self) -> Value {
        match self {
            Cell::Real(x) => json!(x),
            Cell::Int(i) => json!(i),
        }
    }
}

/// A rectangular result table written as CSV or JSON.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes `<stem>.csv` or `<stem>.json` into `dir` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: OutputFormat) -> Result<PathBuf> {
        match format {
            OutputFormat::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
                w.write_record(&self.columns).map_err(|e| io_error(&path, e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|c| c.to_text())).map_err(|e| io_error(&path, e))?;
                }
                w.flush().map_err(|e| io_error(&path, e))?;
                Ok(path)
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{stem}.json"));
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(|c| c.to_json()).collect()))
                    .collect();
                write_json(&path, &json!({ "columns": self.columns, "rows": rows }))?;
                Ok(path)
            }
        }
    }
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Computation(format!("cannot write {}: {e}", path.display()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub started_at: String,
    pub duration_seconds: f64,
    pub summary: Value,
}

impl RunManifest {
    pub fn to_value(&self) -> Value {
        json!({
            "version": self.version,
            "config": self.config.to_value(),
            "started_at": self.started_at,
            "duration_seconds": self.duration_seconds,
            "summary": self.summary,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, &self.to_value())?;
        Ok(path)
    }
}
