use std::path::PathBuf;

use crate::plant::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {}", join_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context}: line {line}, column {column}: {message}")]
    Json {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("fault beyond route end: distance {distance_m} m exceeds route length {route_m} m")]
    BeyondRouteEnd { distance_m: f64, route_m: f64 },

    #[error("cannot read {}: {source}", .path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", .path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad inputs (as opposed to failures while
    /// producing outputs).
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Write { .. })
    }

    pub(crate) fn json(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
