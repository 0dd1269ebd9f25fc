use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid range: lo ({lo}) must be strictly below hi ({hi})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("objective became NaN at iteration {iteration}")]
    NanObjective { iteration: usize },

    #[error("objective diverged at iteration {iteration}: {value} exceeds 1e6 x initial value {initial}")]
    Diverged {
        iteration: usize,
        value: f64,
        initial: f64,
    },

    #[error("solver did not converge within {iterations} iterations (final duality gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("infeasible constraint set: slab {slab} violated by {violation:e}")]
    Infeasible { slab: usize, violation: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model format error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input or configuration, as
    /// opposed to numerical or runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidRange { .. }
                | Error::InvalidParameter(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
