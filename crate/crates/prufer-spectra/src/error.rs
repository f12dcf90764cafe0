//! Crate-wide error type and process exit-code mapping.
//!
//! Every fallible operation returns [`Error`]. The CLI maps each variant to a
//! stable exit code so scripts can distinguish bad input from numerical
//! trouble:
//!
//! | code | meaning                                         |
//! |------|-------------------------------------------------|
//! | 0    | success                                         |
//! | 2    | parse error (malformed model/path/frame file)   |
//! | 3    | invariant violation (shapes, tolerances, ...)   |
//! | 4    | I/O error                                       |
//! | 5    | completeness failure (eigenvalue count mismatch)|
//! | 6    | tangency (non-transversal crossing unresolved)  |
//! | 7    | integration failure (ODE drift over budget)     |

use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// Input file is syntactically or structurally invalid.
    #[error("parse error: {0}")]
    Parse(String),

    /// A documented pre-condition or type invariant does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Underlying I/O failure (missing file, unwritable output, ...).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An eigenvalue scan found fewer or more crossings than the matrix
    /// dimension demands.
    #[error("completeness failure: {0}")]
    Completeness(String),

    /// A path stays on, or touches, the singular cycle without crossing it
    /// transversally at the available resolution.
    #[error("tangency: {0}")]
    Tangency(String),

    /// The ODE integrator could not keep the symplectic drift within budget.
    #[error("integration failure: {0}")]
    Integration(String),
}

impl Error {
    /// Process exit code associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Invariant(_) => 3,
            Error::Io(_) => 4,
            Error::Completeness(_) => 5,
            Error::Tangency(_) => 6,
            Error::Integration(_) => 7,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
