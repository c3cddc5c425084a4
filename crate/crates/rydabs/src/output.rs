//! CSV tables, JSON summaries and the per-invocation results directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;

use crate::config::RunConfig;

/// A CSV table held in memory; every column name carries its unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Shortest round-trip representation, so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Missing values are written as empty fields.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Everything a command produced.
#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub tables: Vec<(&'static str, Table)>,
    pub summary: Value,
    /// `Some(false)` when an acceptance check failed.
    pub passed: Option<bool>,
}

impl CommandOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }
}

/// Creates `<out>/<command>-NNN` with the first unused number.
pub fn invocation_dir(out: &Path, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for n in 1.. {
        let dir = out.join(format!("{command}-{n:03}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

pub fn write_all(dir: &Path, cfg: &RunConfig, output: &CommandOutput) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    for (name, table) in &output.tables {
        fs::write(dir.join(name), table.to_csv()?)?;
    }
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&output.summary)?,
    )?;
    Ok(())
}

/// Reads a `(delta_mhz, transmission)` CSV.
pub fn read_spectrum(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{} has no `{name}` column", path.display()))
    };
    let (d, t) = (col("delta_mhz")?, col("transmission")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{} row {}: not a number", path.display(), line + 2))
        };
        out.push((parse(d)?, parse(t)?));
    }
    Ok(out)
}
