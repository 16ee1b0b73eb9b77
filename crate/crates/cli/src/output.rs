//! Tabular output in text, CSV or JSON lines.

use std::io::{self, Write};

use clap::ValueEnum;
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Text,
    Csv,
    JsonLines,
}

/// Rows of typed cells under fixed column names.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    /// Text mode prints `column: value` lines instead of tab-separated rows.
    record: bool,
    /// Extra lines for text mode only.
    notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
            record: false,
            notes: Vec::new(),
        }
    }

    /// A single-row table shown as `key: value` lines in text mode.
    pub fn record(fields: Vec<(&'static str, Value)>) -> Table {
        let (columns, row): (Vec<_>, Vec<_>) = fields.into_iter().unzip();
        Table {
            columns,
            rows: vec![row],
            record: true,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Text => {
                for row in &self.rows {
                    if self.record {
                        for (c, v) in self.columns.iter().zip(row) {
                            writeln!(out, "{c}: {}", text(v))?;
                        }
                    } else {
                        let cells: Vec<String> = row.iter().map(text).collect();
                        writeln!(out, "{}", cells.join("\t"))?;
                    }
                }
                for note in &self.notes {
                    writeln!(out, "{note}")?;
                }
            }
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(out);
                w.write_record(&self.columns).map_err(io::Error::other)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(text)).map_err(io::Error::other)?;
                }
                w.flush()?;
            }
            Format::JsonLines => {
                for row in &self.rows {
                    let object: Map<String, Value> = self
                        .columns
                        .iter()
                        .map(|c| c.to_string())
                        .zip(row.iter().cloned())
                        .collect();
                    serde_json::to_writer(&mut *out, &Value::Object(object))?;
                    out.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Renders bytes as UTF-8, escaping backslashes and invalid sequences as
/// `\\` and `\xNN` so the original bytes stay recoverable.
pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for chunk in bytes.utf8_chunks() {
        for c in chunk.valid().chars() {
            if c == '\\' {
                out.push_str("\\\\");
            } else {
                out.push(c);
            }
        }
        for b in chunk.invalid() {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

pub fn opt<T: Into<Value>>(v: Option<T>) -> Value {
    v.map_or(Value::Null, Into::into)
}
