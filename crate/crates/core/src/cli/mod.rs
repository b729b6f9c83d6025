//! Experiment runner behind the `rmfit` binary: JSON configs in, CSV and JSON
//! files out.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure (or a failed comparison),
//! 2 invalid configuration, 3 truncation storm, 4 oracle non-convergence.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

pub use compare::{compare_runs, CompareReport, CompareTolerances, RunData};
pub use config::{ExperimentConfig, InitialGuess, Mode, OutputFormat, PotentialName, StateSpec};
pub use experiment::{
    resolve_out_dir, run_bvp, run_rm, run_spectrum, run_sweep, Overrides, SpectrumAt, Sweep, OUT_DIR_ENV,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },

    #[error("incompatible runs: `{field}` differs ({left} vs {right})")]
    Incompatible { field: String, left: String, right: String },

    #[error("truncation storm: sigma reached {sigma} after {iterations} iterations")]
    TruncationStorm { sigma: usize, iterations: usize },

    #[error("boundary value solve did not converge: residual {residual:e} after {iterations} Newton steps")]
    NotConverged { residual: f64, iterations: usize },

    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Incompatible { .. } => 2,
            CliError::TruncationStorm { .. } => 3,
            CliError::NotConverged { .. } => 4,
            CliError::Io { .. } | CliError::Format { .. } | CliError::Core(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
