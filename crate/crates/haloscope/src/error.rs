//! Unified error type with process exit-code mapping.
//!
//! Exit codes: 0 success, 2 usage/configuration error, 3 data/format/external
//! error, 4 numerical failure.

use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments, configuration, or precondition violations caused by
    /// the caller's request (exit code 2).
    #[error("{0}")]
    Usage(String),

    /// I/O failure, always carrying the offending path (exit code 3).
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed, truncated, or inconsistent data (exit code 3).
    #[error("{0}")]
    Format(String),

    /// External denoiser process failure (exit code 3).
    #[error(transparent)]
    External(#[from] ExternalError),

    /// Numerical failure: non-convergence, degenerate statistics (exit code 4).
    #[error("{0}")]
    Numerical(String),
}

/// Failures of the external-denoiser child process protocol, each distinct.
#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to spawn `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },

    #[error("`{command}` exited with {status}{stderr}")]
    NonzeroExit {
        command: String,
        status: String,
        /// Pre-formatted stderr tail (empty, or "\n--- stderr ---\n...").
        stderr: String,
    },

    #[error("`{command}` exceeded the {timeout_secs} s timeout and was killed")]
    Timeout { command: String, timeout_secs: u64 },

    #[error("output length mismatch: expected {expected} samples, got {got}")]
    OutputLength { expected: u64, got: u64 },

    #[error("output sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    OutputRate { expected: u64, got: u64 },

    #[error("command exited successfully but produced no readable output at {path}: {detail}")]
    OutputMissing { path: PathBuf, detail: String },
}

impl Error {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Format(_) | Error::External(_) => 3,
            Error::Numerical(_) => 4,
        }
    }

    /// Convenience constructor attaching a path to an `std::io::Error`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_by_category() {
        assert_eq!(Error::Usage("x".into()).exit_code(), 2);
        assert_eq!(
            Error::io("/nope", std::io::Error::from(std::io::ErrorKind::NotFound)).exit_code(),
            3
        );
        assert_eq!(Error::Format("bad".into()).exit_code(), 3);
        assert_eq!(
            Error::External(ExternalError::OutputLength {
                expected: 10,
                got: 9
            })
            .exit_code(),
            3
        );
        assert_eq!(Error::Numerical("diverged".into()).exit_code(), 4);
    }

    #[test]
    fn messages_name_the_offending_quantities() {
        let e = ExternalError::OutputLength {
            expected: 1000,
            got: 999,
        };
        let msg = e.to_string();
        assert!(msg.contains("1000") && msg.contains("999"));

        let e = Error::io("/data/run.tsd", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert!(e.to_string().contains("/data/run.tsd"));
    }
}
