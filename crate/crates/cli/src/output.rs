use std::fs::{self, File};
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// A table cell. Non-finite floats are kept as strings so that JSON stays
/// valid.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(x.to_string())
    }
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

/// Tabular result plus a structured payload for JSON consumers.
#[derive(Debug)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub details: Value,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn with_details(mut self, details: impl Serialize) -> Result<Self> {
        self.details = serde_json::to_value(details)?;
        Ok(self)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_csv(report: &Report, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.columns)?;
    for row in &report.rows {
        w.write_record(row.iter().map(cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(report: &Report, config: &RunConfig, mut out: impl Write) -> Result<()> {
    let doc = json!({
        "metadata": Metadata {
            tool: "flowerperc",
            version: env!("CARGO_PKG_VERSION"),
            config,
        },
        "columns": report.columns,
        "rows": report.rows,
        "details": report.details,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn emit(report: &Report, config: &RunConfig) -> Result<()> {
    let sink: Box<dyn Write> = match &config.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match config.format {
        Format::Csv => write_csv(report, &mut sink)?,
        Format::Json => write_json(report, config, &mut sink)?,
    }
    sink.flush()?;
    Ok(())
}
