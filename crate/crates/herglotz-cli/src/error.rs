use std::path::PathBuf;

use thiserror::Error;

/// Exit statuses: 0 pass, 1 tolerance failure, 2 usage or config error,
/// 3 I/O error, 4 result reported but not judged (field support beyond the
/// truncation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Unjudged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Unjudged => 4,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Compute(#[from] herglotz::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        use herglotz::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Compute(e) => match e {
                E::Param(_) | E::EqualSpeeds | E::Domain(_) | E::Mode { .. } | E::Invalid(_) => 2,
                _ => 1,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
