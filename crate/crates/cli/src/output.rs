//! Result tables and their CSV/JSON renderings.
//!
//! Every CSV file starts with a `#` line carrying the schema version, table
//! name, spec hash and seed, followed by an ordinary header row. Nothing
//! time- or host-dependent is written, so identical inputs give identical
//! bytes.

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "pauli-est/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(format_f64(*v)),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    /// The cell in `column` of row `row`, as text.
    pub fn get(&self, row: usize, column: &str) -> Option<String> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.get(row).map(|r| r[c].text())
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(k, v)| (k.clone(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Everything a command produced.
#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub command: String,
    pub tables: Vec<Table>,
    /// Extra structured results for the JSON sidecar.
    pub details: Value,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Provenance echoed into every file.
#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub spec_hash: String,
    pub seed: u64,
    pub spec: Value,
}

pub fn render_csv(table: &Table, info: &RunInfo) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!(
        "#schema={SCHEMA},table={},spec_hash={},seed={}\n{body}",
        table.name, info.spec_hash, info.seed
    )
}

fn metadata(out: &CommandOutput, info: &RunInfo) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(out.command));
    m.insert("spec_hash".into(), json!(info.spec_hash));
    m.insert("seed".into(), json!(info.seed));
    m.insert("spec".into(), info.spec.clone());
    m.insert("failures".into(), json!(out.failures));
    m.insert("warnings".into(), json!(out.warnings));
    m.insert("details".into(), out.details.clone());
    m
}

/// File names and contents for one command's results.
pub fn render(out: &CommandOutput, info: &RunInfo, format: Format) -> Vec<(String, String)> {
    let mut meta = metadata(out, info);
    match format {
        Format::Csv => {
            let mut files: Vec<(String, String)> = out
                .tables
                .iter()
                .map(|t| (format!("{}-{}.csv", out.command, t.name), render_csv(t, info)))
                .collect();
            meta.insert(
                "tables".into(),
                json!(files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()),
            );
            files.push((format!("{}.json", out.command), pretty(meta)));
            files
        }
        Format::Json => {
            let tables: Map<String, Value> = out
                .tables
                .iter()
                .map(|t| (t.name.clone(), t.json_rows()))
                .collect();
            meta.insert("tables".into(), Value::Object(tables));
            vec![(format!("{}.json", out.command), pretty(meta))]
        }
    }
}

fn pretty(m: Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("json");
    s.push('\n');
    s
}
