//! Crate-wide error type. Variants carry enough structure for the CLI to map
//! every failure onto one of three exit-code classes.

use std::fmt;
use std::path::PathBuf;

/// Exit-code class of an error: configuration, I/O, or numeric failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numeric,
}

#[derive(Debug)]
pub enum Error {
    /// Operand extents incompatible with the requested operation.
    Shape(String),
    /// Invalid configuration value or combination.
    Config(String),
    /// Non-finite value or other numeric breakdown; message names the site.
    Numeric(String),
    /// Scene synthesis could not satisfy its constraints (placement retries
    /// exhausted, intensity solve impossible).
    Generation(String),
    /// `backward` called twice on the same tape.
    StaleTape,
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// File existed but could not be decoded (PNG, JSON, checkpoint).
    Decode {
        path: PathBuf,
        detail: String,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape(_) | Error::Config(_) | Error::Generation(_) => ErrorKind::Config,
            Error::Numeric(_) | Error::StaleTape => ErrorKind::Numeric,
            Error::Io { .. } | Error::Decode { .. } => ErrorKind::Io,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn decode(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Decode { path: path.into(), detail: detail.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Generation(msg) => write!(f, "generation error: {msg}"),
            Error::StaleTape => write!(f, "backward called on a consumed tape; rebuild the graph before differentiating again"),
            Error::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            Error::Decode { path, detail } => write!(f, "cannot decode {}: {detail}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
