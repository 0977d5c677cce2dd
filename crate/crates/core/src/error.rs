use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simulation diverged at step {step}: {quantity}")]
    Divergence { step: usize, quantity: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("timing error: {0}")]
    Timing(String),

    #[error("NARMA-10 target diverged at symbol {index} (|y| = {value}); reseed the input")]
    NarmaDivergence { index: usize, value: f64 },

    #[error("drive has zero mean but a nonzero target power was requested")]
    ZeroMeanDrive,

    #[error("normal equations are singular (rank deficient) with lambda = 0")]
    RankDeficient,

    #[error("ridge residual {residual:e} exceeds bound {bound:e}")]
    ResidualBound { residual: f64, bound: f64 },

    #[error("target is constant; NMSE normalization undefined")]
    ConstantTarget,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("all beta values failed: {0}")]
    AllBetasFailed(String),

    #[error("no successful grid point")]
    NoSuccessfulPoint,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, stage: &'static str) -> Self {
        Self::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Walks through stage wrappers to the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self.root(),
            Error::Divergence { .. } | Error::NarmaDivergence { .. }
        )
    }
}
