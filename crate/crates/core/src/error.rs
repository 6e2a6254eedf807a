use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    AtRound { round: usize, source: Box<Error> },

    #[error("replicate {run}: {source}")]
    AtRun { run: usize, source: Box<Error> },

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_run(self, run: usize) -> Self {
        Error::AtRun {
            run,
            source: Box::new(self),
        }
    }

    /// Strips round/run wrappers to the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtRound { source, .. } | Error::AtRun { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the root cause is a configuration or input problem rather
    /// than a solver outcome.
    pub fn is_config(&self) -> bool {
        matches!(
            self.root(),
            Error::Config(_) | Error::InvalidInput(_) | Error::Dimension { .. } | Error::Json(_)
        )
    }

    /// True when the root cause came out of a conic solve.
    pub fn is_solver(&self) -> bool {
        matches!(
            self.root(),
            Error::NumericalFailure(_) | Error::Infeasible(_) | Error::Unbounded(_)
        )
    }
}
