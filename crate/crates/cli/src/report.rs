//! Tabular reports written to stdout as CSV or JSON.

use std::io::Write;

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One keyed numeric record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow(Vec<(&'static str, f64)>);

impl ReportRow {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn with(mut self, key: &'static str, value: f64) -> Self {
        self.0.push((key, value));
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.iter().map(|(k, _)| *k)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|(_, v)| *v)
    }
}

impl Default for ReportRow {
    fn default() -> Self {
        Self::new()
    }
}

/// Rows sharing one fixed column set.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    columns: Vec<&'static str>,
    rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Append a row; its keys must match the report columns in order and its
    /// values must be finite.
    pub fn push(&mut self, row: ReportRow) -> Result<(), CliError> {
        if !row.keys().eq(self.columns.iter().copied()) {
            return Err(CliError::Internal(format!(
                "row keys {:?} do not match columns {:?}",
                row.keys().collect::<Vec<_>>(),
                self.columns
            )));
        }
        if let Some((k, v)) = row.0.iter().find(|(_, v)| !v.is_finite()) {
            return Err(CliError::Divergence(format!("non-finite value {v} in column {k}")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[&'static str] {
        &self.columns
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.values().map(format_value)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = row
                    .0
                    .iter()
                    .map(|(k, v)| (k.to_string(), json_number(*v)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut *out, &Value::Array(rows))
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}

fn as_integer(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Shortest representation that parses back to the same `f64`. Integral
/// values are written without a fractional part, as in the JSON output.
pub fn format_value(v: f64) -> String {
    match as_integer(v) {
        Some(i) => i.to_string(),
        None => format!("{v:?}"),
    }
}

fn json_number(v: f64) -> Value {
    if let Some(i) = as_integer(v) {
        Value::Number(Number::from(i))
    } else {
        Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}
