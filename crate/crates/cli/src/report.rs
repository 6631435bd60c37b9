use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// A numeric contract that did not hold.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub contract: String,
    pub detail: String,
}

/// A CSV file written under `--csv DIR`.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub result: Value,
    pub failures: Vec<Failure>,
    pub human: String,
    pub tables: Vec<CsvTable>,
}

impl Report {
    pub fn new(command: &'static str, result: Value, human: String) -> Self {
        Self { command, result, failures: Vec::new(), human, tables: Vec::new() }
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) {
        self.tables.push(CsvTable {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows,
        });
    }

    pub fn write_csv(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            written.push(path);
        }
        Ok(written)
    }

    /// Records a failure unless `ok`.
    pub fn require(&mut self, ok: bool, contract: &str, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(Failure { contract: contract.to_string(), detail: detail() });
        }
    }

    pub fn status(&self) -> &'static str {
        if self.failures.is_empty() {
            "pass"
        } else {
            "fail"
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "status": self.status(),
            "failures": self.failures,
            "result": self.result,
        })
    }

    pub fn failure_record(&self) -> String {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "status": "fail",
            "failures": self.failures,
        })
        .to_string()
    }
}

pub fn error_record(command: &str, message: &str) -> String {
    json!({ "schema_version": SCHEMA_VERSION, "command": command, "status": "error", "error": message }).to_string()
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(", "))
}
