use std::fmt;
use std::io;

use np_core::NpError;

#[derive(Debug)]
pub enum CliError {
    Numerical(NpError),
    Io { path: String, source: io::Error },
    Config(String),
    /// Checks that ran but missed their thresholds.
    Validation(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Numerical(_) | CliError::Config(_) => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Numerical(e) => e.name(),
            CliError::Io { .. } => "io-error",
            CliError::Config(_) => "config-error",
            CliError::Validation(_) => "validation-failure",
        }
    }

    pub fn io(path: &str, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Validation(failures) => write!(f, "{} check(s) failed: {}", failures.len(), failures.join("; ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<NpError> for CliError {
    fn from(e: NpError) -> Self {
        CliError::Numerical(e)
    }
}
