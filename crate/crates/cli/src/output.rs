//! CSV and JSON writers for tabular results.
//!
//! Floats are written with 17 significant digits in CSV and as shortest
//! round-trip numbers in JSON, so identical runs give identical files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

/// A result table with its provenance and summary statistics.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub command: String,
    pub provenance: Vec<(String, String)>,
    pub summary: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Serialize)]
struct JsonTable {
    command: String,
    config: Map<String, Value>,
    summary: Map<String, Value>,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(command: &str, provenance: Vec<(&str, String)>, columns: &[&str]) -> Self {
        Table {
            command: command.to_string(),
            provenance: provenance.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Table::default()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let config: Vec<String> = self.provenance.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(out, "# wavepacket {} {}", self.command, config.join(" "))?;
        for (k, v) in &self.summary {
            writeln!(out, "# {k}={}", v.csv())?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let doc = JsonTable {
            command: self.command.clone(),
            config: self.provenance.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect(),
            summary: self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect(),
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(Cell::json).collect()).collect(),
        };
        serde_json::to_writer(&mut out, &doc)?;
        writeln!(out)?;
        out.flush()
    }

    /// Writes to `path`, or to standard output when no path is given.
    pub fn write(&self, format: Format, path: Option<&Path>) -> io::Result<()> {
        match path {
            Some(path) => {
                let file = io::BufWriter::new(fs::File::create(path)?);
                self.write_format(format, file)
            }
            None => self.write_format(format, io::stdout().lock()),
        }
    }

    fn write_format<W: Write>(&self, format: Format, out: W) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("psi", vec![("V0", "188".into()), ("t", "5".into())], &["p", "abs2"]);
        t.summary.push(("points".into(), Cell::Int(2)));
        t.rows.push(vec![Cell::Float(0.1), Cell::Float(1.0 / 3.0)]);
        t.rows.push(vec![Cell::Float(-2.5), Cell::Float(f64::MIN_POSITIVE)]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# wavepacket psi V0=188 t=5");
        assert_eq!(lines[1], "# points=2");
        assert_eq!(lines[2], "p,abs2");
        assert_eq!(lines[3], "1.0000000000000001e-1,3.3333333333333331e-1");
        let back: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn json_round_trips() {
        let mut buf = Vec::new();
        sample().write_json(&mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["config"]["V0"], "188");
        assert_eq!(v["rows"][0][1].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(v["summary"]["points"], 2);
    }
}
