//! Flat `key = value` configuration files with strict key accounting.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are dotted
//! lower-case identifiers (`grid.n_rho`). Every key must be read by the
//! experiment that runs; leftovers are reported as unknown.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| {
            let mut chars = part.chars();
            chars.next().is_some_and(|c| c.is_ascii_lowercase())
                && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let indent = raw.len() - raw.trim_start().len();
            let Some(eq) = raw.find('=') else {
                return Err(CliError::Parse { line, column: indent + 1, message: "expected `key = value`".into() });
            };
            let key = raw[..eq].trim();
            if key.is_empty() {
                return Err(CliError::Parse { line, column: eq + 1, message: "missing key before `=`".into() });
            }
            let value = raw[eq + 1..].trim();
            if value.is_empty() {
                return Err(CliError::Parse { line, column: eq + 2, message: format!("missing value for `{key}`") });
            }
            if !valid_key(key) {
                return Err(CliError::Validation {
                    key: key.into(),
                    message: "keys are dotted lower-case identifiers".into(),
                });
            }
            if let Some(prev) = entries.insert(key.to_string(), Entry { value: value.into(), line }) {
                return Err(CliError::Validation {
                    key: key.into(),
                    message: format!("set twice (lines {} and {line})", prev.line),
                });
            }
        }
        Ok(Self { entries, used: RefCell::default() })
    }

    /// Overrides or adds a key, as for command-line flags.
    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.into(), Entry { value, line: 0 });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// All entries in key order, for the manifest echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(&e.value)
    }

    fn convert<T: FromStr>(key: &str, v: &str, what: &str) -> Result<T, CliError> {
        v.parse().map_err(|_| CliError::Validation { key: key.into(), message: format!("expected {what}, got `{v}`") })
    }

    pub fn str(&self, key: &str) -> Result<String, CliError> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| CliError::Validation { key: key.into(), message: "required key is missing".into() })
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.str(key)?;
        let x: f64 = Self::convert(key, &v, "a number")?;
        if !x.is_finite() {
            return Err(CliError::Validation { key: key.into(), message: "must be finite".into() });
        }
        Ok(x)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.contains(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            Some(v) => Self::convert(key, v, "a non-negative integer"),
            None => Ok(default),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            Some(v) => Self::convert(key, v, "a non-negative integer"),
            None => Ok(default),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            Some(v) => Self::convert(key, v, "`true` or `false`"),
            None => Ok(default),
        }
    }

    /// Comma-separated numbers.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.str(key)?;
        v.split(',').map(|x| Self::convert(key, x.trim(), "a comma-separated list of numbers")).collect()
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        if self.contains(key) {
            self.list(key)
        } else {
            Ok(default.to_vec())
        }
    }

    /// A value restricted to `choices`.
    pub fn choice(&self, key: &str, choices: &[&str], default: Option<&str>) -> Result<String, CliError> {
        let v = match (self.raw(key), default) {
            (Some(v), _) => v.to_string(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return self.str(key),
        };
        if choices.contains(&v.as_str()) {
            Ok(v)
        } else {
            Err(CliError::Validation { key: key.into(), message: format!("expected one of {}, got `{v}`", choices.join(", ")) })
        }
    }

    /// Fails on the first key nobody read.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(CliError::Validation { key: k.clone(), message: "unknown key".into() }),
            None => Ok(()),
        }
    }
}
