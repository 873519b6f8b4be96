//! Experiment driver around `degenlab-core`: configuration parsing, run
//! orchestration (solve / sweep / verify / lab), run persistence with a
//! digest manifest, and plot-data emission.

pub mod config;
pub mod fields;
pub mod io;
pub mod manifest;
pub mod runner;

use std::fmt;

#[derive(Debug)]
pub enum DriverError {
    /// File access problem: (path, message).
    Io(String, String),
    /// Malformed file content: (path, message).
    Format(String, String),
    /// Configuration validation problems, all of them.
    Config(Vec<String>),
    /// Bad analytic field specification.
    Field(String),
    /// Error surfaced from the numeric core.
    Core(degenlab_core::Error),
    /// A stage failed under `--strict`.
    Strict(String),
}

impl fmt::Display for DriverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverError::Io(path, msg) => write!(f, "io error at {path}: {msg}"),
            DriverError::Format(path, msg) => write!(f, "bad file format at {path}: {msg}"),
            DriverError::Config(errors) => {
                writeln!(f, "invalid configuration ({} problem(s)):", errors.len())?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            DriverError::Field(msg) => write!(f, "field spec error: {msg}"),
            DriverError::Core(e) => write!(f, "{e}"),
            DriverError::Strict(msg) => write!(f, "strict mode abort: {msg}"),
        }
    }
}

impl std::error::Error for DriverError {}
