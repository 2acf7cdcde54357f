use std::fmt;

use tensegrity::Error;

pub const EXIT_IO: u8 = 1;
pub const EXIT_SPEC: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;
pub const EXIT_UNREACHABLE: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

/// A fatal error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn spec(message: impl Into<String>) -> Self {
        Self { code: EXIT_SPEC, message: message.into() }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: format!("{context}: {err}") }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidParameter(_) | Error::DimensionMismatch(_) | Error::AsymmetricSprings => EXIT_SPEC,
            Error::Unreachable { .. } => EXIT_UNREACHABLE,
            _ => EXIT_NUMERICAL,
        };
        Self { code, message: err.to_string() }
    }
}
