use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] vecshuffle_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: row {row}, column {column}: {message}", path.display())]
    Cell {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },
    #[error("{}: no data rows", .0.display())]
    EmptyDataset(PathBuf),
    #[error("no feasible sweep point: {0}")]
    NoFeasiblePoints(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        HarnessError::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 infeasible, 3 I/O, 4 audit failure.
    pub fn exit_code(&self) -> i32 {
        use vecshuffle_core::Error as Core;
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Core(Core::Infeasible(_)) | HarnessError::NoFeasiblePoints(_) => 2,
            HarnessError::Core(Core::InsufficientTrials(_)) | HarnessError::AuditFailed(_) => 4,
            HarnessError::Core(_) => 1,
            HarnessError::Io { .. }
            | HarnessError::Csv { .. }
            | HarnessError::Cell { .. }
            | HarnessError::EmptyDataset(_) => 3,
        }
    }
}
