//! Pipelines behind the `tubecalc` binary and the JSON report they produce.

pub mod commands;
pub mod config;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tubecalc_core::convergence::Assertion;
use tubecalc_core::TubeError;

pub use config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] TubeError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Io(_) => "io",
            CliError::Invalid(_) => "invalid_config",
            CliError::Core(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    /// Fully resolved configuration.
    pub config: RunConfig,
    pub results: Value,
    pub assertions: Vec<Assertion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if self.assertions.iter().any(|a| !a.passed) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are always serializable")
    }
}

/// Output of a pipeline: results, assertions and an optional CSV body.
pub struct Outcome {
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub csv: Option<Vec<u8>>,
}

/// Runs the configured pipeline in a pool of `threads` workers (or the global
/// pool) and wraps every failure into the report.
pub fn run(mut config: RunConfig) -> (Report, Option<Vec<u8>>) {
    let command = config.command.map(|c| c.name()).unwrap_or("none").to_string();
    let outcome = config.validate().and_then(|_| match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))
            .and_then(|pool| pool.install(|| commands::dispatch(&mut config))),
        None => commands::dispatch(&mut config),
    });
    match outcome {
        Ok(o) => (
            Report { command, config, results: o.results, assertions: o.assertions, error: None },
            o.csv,
        ),
        Err(e) => {
            eprintln!("tubecalc: {e}");
            (
                Report { command, config, results: Value::Null, assertions: Vec::new(), error: Some(e.code().into()) },
                None,
            )
        }
    }
}
