use std::path::PathBuf;

use thiserror::Error;

use crate::schema::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row has {found} values but the schema expects {expected}")]
    MissingVariable { expected: usize, found: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{variable}` has unknown category `{label}`")]
    UnknownCategory { variable: String, label: String },

    #[error("header mismatch: missing [{}], extra [{}]", missing.join(", "), extra.join(", "))]
    HeaderMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{} validation violation(s); first: {}", violations.len(), first_violations(violations))]
    Validation { violations: Vec<(usize, Violation)> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("the source portfolio has no claims, so the first classifier sees a single class; use a larger or reseeded source portfolio")]
    SingleClass,

    #[error("no rows with a positive claim count to train the severity model on")]
    NoClaimants,

    #[error("encoder mismatch: {0}")]
    EncoderMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn first_violations(violations: &[(usize, Violation)]) -> String {
    violations
        .iter()
        .take(10)
        .map(|(row, v)| format!("row {row}: {v}"))
        .collect::<Vec<_>>()
        .join("; ")
}
