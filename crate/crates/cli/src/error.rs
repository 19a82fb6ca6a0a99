use std::fmt;
use std::path::Path;

use serde::Serialize;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn validation(kind: &str, message: impl Into<String>) -> Self {
        CliError { error: kind.to_string(), message: message.into(), exit_code: EXIT_VALIDATION }
    }

    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        CliError { error: kind.to_string(), message: message.into(), exit_code: EXIT_RUNTIME }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::runtime("io", format!("{}: {e}", path.display()))
    }
}

impl From<capnet::Error> for CliError {
    fn from(e: capnet::Error) -> Self {
        let code = if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME };
        CliError { error: e.kind().to_string(), message: e.to_string(), exit_code: code }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}
