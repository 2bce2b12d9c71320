use std::fmt;
use std::process::ExitCode;

use treequad::model::ModelError;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// A model invariant, efficiency check or oracle spot-check failed.
    Validation = 1,
    /// An input file could not be read or parsed.
    Input = 2,
    /// The request is well-formed but cannot be satisfied.
    Precondition = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure { class: Class::Validation, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Failure { class: Class::Input, message: message.into() }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Failure { class: Class::Precondition, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ModelError> for Failure {
    fn from(err: ModelError) -> Self {
        if err.is_parse_error() {
            Failure::input(format!("model: {err}"))
        } else {
            Failure::validation(format!("model invariant: {err}"))
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::input(err.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(err: csv::Error) -> Self {
        Failure::input(err.to_string())
    }
}
