use std::path::PathBuf;

use fuzzy_runoff::{ErrorKind, FuzzyError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {reason}")]
    ConfigFile { path: PathBuf, reason: String },

    #[error("config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Input { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] FuzzyError),
}

impl CliError {
    /// 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ConfigFile { .. } | Self::Config { .. } => 2,
            Self::Output { .. } | Self::Input { .. } => 3,
            Self::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Core(FuzzyError::invalid("m", "bad")).exit_code(), 2);
        assert_eq!(
            CliError::Core(FuzzyError::DegenerateSeries("short".into())).exit_code(),
            3
        );
        assert_eq!(CliError::Core(FuzzyError::ZeroRegressors.labeled("gk_30s_dim")).exit_code(), 4);
        assert_eq!(
            CliError::Config {
                field: "strides",
                reason: "empty".into()
            }
            .exit_code(),
            2
        );
    }
}
