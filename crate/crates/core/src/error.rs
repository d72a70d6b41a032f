use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model ingestion, construction and propagation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {field}: {msg}")]
    Parse {
        path: String,
        line: usize,
        field: String,
        msg: String,
    },

    #[error("{matrix} is not Hermitian: max deviation {max_dev:.3e} (relative tolerance {tol:.1e})")]
    NotHermitian {
        matrix: &'static str,
        max_dev: f64,
        tol: f64,
    },

    #[error("{matrix}: element ({n}, {m}) = {value:.3e} violates the spin selection rule ({reason})")]
    SelectionRule {
        matrix: &'static str,
        n: usize,
        m: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: {what} has {got}, expected {expected}")]
    Dimension {
        what: String,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver did not converge for a {n}x{n} Hermitian matrix after {max_iter} iterations")]
    EigenSolver { n: usize, max_iter: usize },

    #[error("step size underflow at t = {t:.6e} a.u.: required step {h:.3e} < h_min {h_min:.3e} (scaled local error {err:.3e})")]
    StepUnderflow { t: f64, h: f64, h_min: f64, err: f64 },

    #[error("non-finite value in density matrix at t = {t:.6e} a.u. (step {h:.3e})")]
    NonFinite { t: f64, h: f64 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    /// An error raised inside one stage of a run.
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Tag the error with the run stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Whether the error is an input/validation problem rather than a failure
    /// during computation.
    pub fn is_validation(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_validation();
        }
        !matches!(
            self,
            Error::EigenSolver { .. }
                | Error::StepUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
