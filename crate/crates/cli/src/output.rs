//! CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Round-trip exact float formatting (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `< 1e-9`.
    pub rule: String,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub name: String,
    pub command: String,
    pub anchor: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

/// Collects checks and artifacts for one run.
pub struct Run {
    pub out: PathBuf,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Run {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { out: out.to_path_buf(), checks: Vec::new(), artifacts: Vec::new() })
    }

    /// `value < limit`.
    pub fn below(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), value, rule: format!("< {limit:e}"), pass: value < limit });
    }

    /// `value > limit`.
    pub fn above(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), value, rule: format!("> {limit:e}"), pass: value > limit });
    }

    /// A yes/no outcome recorded as 1 or 0.
    pub fn holds(&mut self, name: &str, ok: bool, rule: &str) {
        self.checks.push(Check { name: name.into(), value: if ok { 1.0 } else { 0.0 }, rule: rule.into(), pass: ok });
    }

    fn write(&mut self, file: &str, body: &str) -> Result<(), CliError> {
        let path = self.out.join(file);
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(file.into());
        Ok(())
    }

    pub fn csv(&mut self, file: &str, t: &Table) -> Result<(), CliError> {
        self.write(file, &t.render())
    }

    pub fn json<T: Serialize>(&mut self, file: &str, v: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.write(file, &(body + "\n"))
    }

    /// Free-form text artifact, e.g. a reusable metric spec.
    pub fn text(&mut self, file: &str, body: &str) -> Result<(), CliError> {
        self.write(file, body)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
