//! Configuration, orchestration and serialization for command-line use.

use std::path::PathBuf;

use thiserror::Error;

use crate::error::TcmError;

pub mod config;
pub mod output;
pub mod run;

pub use config::{emit_config, parse_config, parse_config_str, AmplitudeMode, RunConfig, Side};
pub use output::{read_csv, read_snapshot, Manifest, RunResult, Snapshot, CSV_COLUMNS};
pub use run::{run, simulate, sweep, verify, Check, RunOutcome, Simulation, SweepRow, SweepSummary};

/// Errors from configuration handling and artifact I/O.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error{}: {message}", .field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Parse { field: Option<String>, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output error: {0}")]
    Output(String),

    #[error(transparent)]
    Core(#[from] TcmError),
}
