use opa_bench::BenchError;
use opa_core::OpaError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One schema problem, located by a JSON pointer into the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub pointer: String,
    pub message: String,
}

impl Violation {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { pointer: pointer.into(), message: message.into() }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

fn list(violations: &[Violation]) -> String {
    violations.iter().map(Violation::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {}", list(.0))]
    Schema(Vec<Violation>),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] OpaError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

/// Coarse error classes shared by the CLI exit codes and the HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Solver,
    Internal,
}

impl WorkbenchError {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        WorkbenchError::Schema(vec![Violation::new(pointer, message)])
    }

    pub fn code(&self) -> &'static str {
        match self {
            WorkbenchError::Parse(_) => "PARSE_ERROR",
            WorkbenchError::Schema(_) => "SCHEMA_ERROR",
            WorkbenchError::NotFound(_) => "NOT_FOUND",
            WorkbenchError::Conflict(_) => "CONFLICT",
            WorkbenchError::UnknownModel(_) => "UNKNOWN_MODEL",
            WorkbenchError::Io(_) => "IO_ERROR",
            WorkbenchError::Model(e) => e.code(),
            WorkbenchError::Bench(e) => e.code(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            WorkbenchError::Parse(_) | WorkbenchError::Schema(_) | WorkbenchError::UnknownModel(_) => {
                ErrorClass::Validation
            }
            WorkbenchError::NotFound(_) => ErrorClass::NotFound,
            WorkbenchError::Conflict(_) => ErrorClass::Conflict,
            WorkbenchError::Io(_) => ErrorClass::Internal,
            WorkbenchError::Model(e) => match e {
                OpaError::NoPendingQuestion | OpaError::SessionExhausted(_) | OpaError::SessionInconsistent => {
                    ErrorClass::Conflict
                }
                e if e.is_validation() => ErrorClass::Validation,
                _ => ErrorClass::Solver,
            },
            WorkbenchError::Bench(e) if e.is_validation() => ErrorClass::Validation,
            WorkbenchError::Bench(_) => ErrorClass::Solver,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            WorkbenchError::Schema(v) => v,
            _ => &[],
        }
    }
}

pub type Result<T> = std::result::Result<T, WorkbenchError>;
