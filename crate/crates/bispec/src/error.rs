use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bispec_core::Error),
    #[error("config {path}: {detail}")]
    Config { path: PathBuf, detail: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("rel_error {rel_error:.3e} exceeds tolerance {tol:.3e}")]
    Tolerance { rel_error: f64, tol: f64 },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_PARAMETER: i32 = 2;
pub const EXIT_GENERICITY: i32 = 3;
pub const EXIT_INCONSISTENT: i32 = 4;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_genericity() => EXIT_GENERICITY,
            CliError::Core(e) if e.is_inconsistency() => EXIT_INCONSISTENT,
            CliError::CheckFailed(_) | CliError::Tolerance { .. } => EXIT_FAILED,
            _ => EXIT_PARAMETER,
        }
    }

    /// Pipeline stage for core errors raised inside `recover_orbit`.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Core(e) => e.stage().map(|s| s.name()),
            _ => None,
        }
    }
}
