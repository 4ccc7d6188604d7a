use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("model has no rules")]
    EmptyModel,

    #[error("cluster {cluster} has zero membership mass")]
    EmptyCluster { cluster: usize },

    #[error("covariance of cluster {cluster} is not positive definite")]
    SingularCovariance { cluster: usize },

    #[error("cluster centers {first} and {second} coincide")]
    CoincidentCenters { first: usize, second: usize },

    #[error("subtractive clustering accepted no center")]
    NoCenters,

    #[error("regressor matrix is identically zero")]
    ZeroRegressors,

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("row {row}: {source}")]
    AtRow {
        row: usize,
        #[source]
        source: Box<FuzzyError>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<FuzzyError>,
    },

    #[error("{label}: {source}")]
    Labeled {
        label: String,
        #[source]
        source: Box<FuzzyError>,
    },

    #[error("data error in {path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("malformed model document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl FuzzyError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn at_row(self, row: usize) -> Self {
        Self::AtRow {
            row,
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Self::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Prefixes the error with a free-form label such as an experiment cell.
    pub fn labeled(self, label: impl Into<String>) -> Self {
        Self::Labeled {
            label: label.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Self::InvalidParameter { .. } | Self::Format(_) => ErrorKind::Config,
            Self::Data { .. } | Self::Io(_) | Self::Csv(_) | Self::DegenerateSeries(_) => {
                ErrorKind::Data
            }
            Self::AtRow { source, .. } | Self::Stage { source, .. } | Self::Labeled { source, .. } => {
                source.kind()
            }
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T, E = FuzzyError> = std::result::Result<T, E>;
