//! Config-driven runner for the slow/fast experiments.

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use config::ExperimentConfig;
use output::{Outcome, Summary};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SLOWFAST_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption failed: {0}")]
    Assumption(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<slowfast::error::Error> for CliError {
    fn from(e: slowfast::error::Error) -> Self {
        use slowfast::error::Error as E;
        let msg = e.to_string();
        match e {
            E::Assumption(_) | E::Regime(_) => CliError::Assumption(msg),
            E::Domain(_) => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub kind: String,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub passed: bool,
    /// check name -> [target, tolerance]
    pub tolerances: BTreeMap<String, [f64; 2]>,
    pub wall_clock_seconds: f64,
    pub workers: usize,
    pub files: Vec<FileEntry>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(CliError::Config(format!("{} is empty", path.display())));
        }
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Sets the global worker pool from `SLOWFAST_WORKERS`, if present.
pub fn init_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("{WORKERS_ENV}={v:?} is not a count")))?;
    if n == 0 {
        return Err(CliError::Config(format!("{WORKERS_ENV} must be at least 1")));
    }
    #[cfg(feature = "parallel")]
    {
        // a second call (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if n == 1 {
        slowfast::par::force_sequential(true);
    }
    Ok(())
}

/// What a run produced, for callers that want more than the exit code.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: Summary,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

fn write(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<FileEntry>) -> Result<(), CliError> {
    std::fs::write(dir.join(name), bytes)?;
    files.push(FileEntry { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    Ok(())
}

/// Runs one config and writes `<table>.csv`, `summary.json` and `manifest.json`.
pub fn run(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<RunResult, CliError> {
    cfg.validate()?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone());
    let start = Instant::now();
    let Outcome { checks, tables, details } = experiments::run_experiment(cfg)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for t in &tables {
        write(&dir, &format!("{}.csv", t.name), t.to_csv().as_bytes(), &mut files)?;
    }
    let passed = checks.iter().all(|c| c.passed);
    let summary = Summary { name: cfg.name.clone(), kind: cfg.experiment.kind().into(), seed: cfg.seed, passed, checks, details };
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    write(&dir, "summary.json", json.as_bytes(), &mut files)?;

    let manifest = RunManifest {
        name: cfg.name.clone(),
        kind: summary.kind.clone(),
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        passed,
        tolerances: summary.checks.iter().map(|c| (c.name.clone(), [c.target, c.tolerance])).collect(),
        wall_clock_seconds: wall,
        workers: worker_count(),
        files,
        config: cfg.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    Ok(RunResult { summary, manifest, manifest_path })
}
