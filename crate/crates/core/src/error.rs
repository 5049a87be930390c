use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("degenerate degree: row {row} of {op} sums to {sum}")]
    DegenerateDegree {
        op: &'static str,
        row: usize,
        sum: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}{}: {msg}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Validation {
        file: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn validation(
        file: impl Into<String>,
        line: Option<usize>,
        msg: impl Into<String>,
    ) -> Self {
        Error::Validation {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 2,
            Error::Io { .. } | Error::Validation { .. } => 3,
            Error::Numerical(_) | Error::DegenerateDegree { .. } => 4,
            Error::Dimension { .. } => 2,
        }
    }
}
