//! Task files, learning campaigns and the run directories they write.

mod campaign;
mod output;
mod taskfile;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ilc::IlcError;
use crate::reference::ReferenceError;
use crate::task::TaskError;

pub use campaign::{
    compare, learn, set_numeric, sweep, transfer, CompareRow, Comparison, Overrides, SweepEntry, COMPARE_TRIALS,
};
pub use output::{limit_violations, read_run, write_run, RunSummary, StoredRun, TrialOutcome, TRIALS_HEADER};
pub use taskfile::{load_task, TaskFile};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{}{message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, message: String },
    #[error("invalid task field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("transfer source {} did not converge; refusing to transfer from it", .0.display())]
    SourceNotConverged(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Ilc(#[from] IlcError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the error comes from the user's input rather than the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Self::Parse { .. } | Self::Field { .. } | Self::Usage(_) | Self::Task(_))
    }
}
