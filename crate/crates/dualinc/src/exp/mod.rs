//! Experiment front door: configuration, seeded end-to-end runs, sweeps,
//! and analysis commands. Outputs are files under the run directory; there
//! is no interactive surface.

mod config;
mod plot;
mod run;

pub use config::{build_dataset, ExperimentConfig, OUT_ROOT_ENV};
pub use plot::phase_accuracy_svg;
pub use run::{
    cmd_analyze, cmd_eval, cmd_sweep, cmd_train, AnalyzeOutcome, EvalOverrides, RunSummary,
    SweepAxis,
};

use crate::data::DataError;
use crate::model::CheckpointError;
use crate::trainer::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl RunError {
    /// Process exit code: 1 config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Train(TrainError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}
