//! Config-driven runner for the vvbath experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod artifacts;
pub mod config;
pub mod experiments;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use artifacts::{write_manifest, ArtifactWriter};
use config::{ConfigError, Diagnostic, Experiment, RunConfig};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(String),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid config: {e}"),
            RunError::Compute(m) => write!(f, "computation failed: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Machine-readable error record printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Compute(_) | RunError::Io(_) => EXIT_COMPUTE,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (error, diagnostics) = match self {
            RunError::Config(e) => ("invalid_config", e.diagnostics.clone()),
            RunError::Compute(_) => ("compute_failure", Vec::new()),
            RunError::Io(_) => ("io_failure", Vec::new()),
        };
        ErrorRecord {
            error,
            message: self.to_string(),
            diagnostics,
        }
    }
}

/// Runs `experiment` and writes its artifacts plus the manifest into
/// `config.out`.
pub fn run(experiment: Experiment, config: &RunConfig) -> Result<Vec<artifacts::FileRecord>, RunError> {
    let diagnostics = config.diagnostics();
    if !diagnostics.is_empty() {
        return Err(RunError::Config(ConfigError { diagnostics }));
    }
    let start = Instant::now();
    let mut writer = ArtifactWriter::create(Path::new(&config.out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunError::Compute(e.to_string()))?;
    let seeds = pool.install(|| match experiment {
        Experiment::Spectrum => experiments::spectrum(config, &mut writer),
        Experiment::Coherence => experiments::coherence(config, &mut writer),
        Experiment::Census => experiments::census(config, &mut writer),
        Experiment::Sweep => experiments::sweep(config, &mut writer),
        Experiment::Register => experiments::register(config, &mut writer),
        Experiment::Rb => experiments::rb(config, &mut writer),
    })?;
    write_manifest(
        &writer,
        experiment.name(),
        config,
        &seeds,
        start.elapsed().as_secs_f64(),
    )?;
    Ok(writer.files().to_vec())
}
