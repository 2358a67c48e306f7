use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dispersion range: {0}")]
    DispersionRange(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gain calibration: {0}")]
    Calibration(String),

    #[error("ensemble member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("crystal length {length_m} m: {source}")]
    Length {
        length_m: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Strips the wrapping context variants.
    pub fn root(&self) -> &Error {
        match self {
            Error::Member { source, .. } | Error::Length { source, .. } | Error::Stage { source, .. } => {
                source.root()
            }
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Domain(_) | Error::DispersionRange(_) => 2,
            Error::Numerical(_) | Error::Calibration(_) => 3,
            Error::Io { .. } | Error::Format(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
