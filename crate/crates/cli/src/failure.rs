use std::fmt;
use std::path::Path;

use heatlab_core::Error;

use crate::config::ConfigError;

/// Command failure, grouped by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Tolerance(String),
    Quadrature(String),
    Io(String),
}

impl Failure {
    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Tolerance(_) => 3,
            Failure::Quadrature(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "{m}"),
            Failure::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            Failure::Quadrature(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Quadrature { .. } => Failure::Quadrature(msg),
            Error::Conditioning { .. } | Error::InsufficientSamples(_) | Error::Coverage { .. } => Failure::Tolerance(msg),
            _ => Failure::Config(msg),
        }
    }
}
