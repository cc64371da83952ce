//! Config-driven front end: one flat `key = value` file names a command,
//! the run writes CSV/JSON artifacts and a `manifest.json` with every check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub mod config;
pub mod experiments;
pub mod output;
pub mod recipes;
pub mod specs;

use config::Config;
use output::{Manifest, Run};

#[derive(Debug)]
pub enum CliError {
    Parse { line: usize, column: usize, message: String },
    Validation { key: String, message: String },
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { line, column, message } => write!(f, "parse error at {line}:{column}: {message}"),
            CliError::Validation { key, message } => write!(f, "invalid key `{key}`: {message}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub const COMMANDS: [&str; 8] = ["ergo", "horizon", "check-surface", "design", "perturb", "wave", "travel-time", "dn"];

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub out: PathBuf,
    pub manifest: Manifest,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.pass {
            0
        } else {
            1
        }
    }
}

/// Reads a config file, or the bundled recipe of that name when no such file
/// exists.
pub fn load(config_path: &Path) -> Result<(String, Config), CliError> {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => match recipes::bundled(&config_path.to_string_lossy()) {
            Some(r) => r.text.to_string(),
            None => return Err(CliError::Runtime(format!("cannot read {}: {e}", config_path.display()))),
        },
    };
    let stem = config_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    Ok((stem, Config::parse(&text)?))
}

/// Runs the experiment described by `config_path`.
///
/// `out` defaults to `out/<name>`; `seed` overrides the `seed` key.
pub fn run(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Outcome, CliError> {
    let (stem, mut cfg) = load(config_path)?;
    if let Some(s) = seed {
        cfg.set("seed", s.to_string());
    }
    execute(&stem, cfg, out)
}

pub fn execute(default_name: &str, cfg: Config, out: Option<&Path>) -> Result<Outcome, CliError> {
    let command = cfg.choice("command", &COMMANDS, None)?;
    let seed = cfg.u64_or("seed", 0)?;
    let name = cfg.str_or("name", default_name);
    let anchor = cfg.str_or("anchor", "");
    let out = out.map_or_else(|| Path::new("out").join(&name), Path::to_path_buf);
    let mut run = Run::new(&out)?;
    let start = Instant::now();
    let exec = match command.as_str() {
        "ergo" => experiments::ergo,
        "horizon" => experiments::horizon,
        "check-surface" => experiments::check_surface,
        "design" => experiments::design,
        "perturb" => experiments::perturb,
        "wave" => experiments::wave,
        "travel-time" => experiments::travel,
        _ => experiments::dn,
    };
    exec(&cfg, &mut run, seed)?;
    cfg.finish()?;
    let manifest = Manifest {
        name,
        command,
        anchor,
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        config: cfg.echo(),
        pass: run.passed(),
        checks: run.checks.clone(),
        artifacts: run.artifacts.clone(),
    };
    run.json("manifest.json", &manifest)?;
    Ok(Outcome { out, manifest })
}
