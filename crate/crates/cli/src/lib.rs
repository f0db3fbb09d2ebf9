//! Library side of the `ihpe` command-line tool.
//!
//! Every subcommand is a plain function returning a report, so the binary
//! only parses arguments, prints and picks the exit code.

pub mod commands;
pub mod config;

use ihpe_core::hpe::HpeError;
use ihpe_core::{BoundError, InstanceError, OracleError, ParamError, TraceError};
use thiserror::Error;

pub use commands::{
    bench, bench_csv, certify, params_table, solve, tau_curve_csv, BenchRow, CertifyReport, ParamRow, SolveArgs,
    SolveSummary,
};
pub use config::{ExperimentConfig, LoadedConfig, CONFIG_SCHEMA_VERSION};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad config, parameters or arguments.
    pub const USAGE: i32 = 1;
    /// A certification check or a rate bound failed.
    pub const VIOLATION: i32 = 2;
    /// The iteration cap was reached before the stopping rule fired.
    pub const CAP_REACHED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parameter error: {0}")]
    Param(#[from] ParamError),
    #[error("parameter error: {0}")]
    Instance(#[from] InstanceError),
    #[error("problem error: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Run(#[from] HpeError),
    #[error("trace error: {0}")]
    Trace(#[from] TraceError),
    #[error("bound error: {0}")]
    Bound(#[from] BoundError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(HpeError::Certification { .. } | HpeError::NegativeEps { .. }) => exit::VIOLATION,
            CliError::Run(HpeError::Param(_) | HpeError::Stopping(_)) => exit::USAGE,
            CliError::Bound(BoundError::Violation { .. }) => exit::VIOLATION,
            _ => exit::USAGE,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}
