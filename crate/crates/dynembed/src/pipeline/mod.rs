//! Pipeline orchestration: configuration, resumable stages, artifact
//! manifest, and report rendering.

mod config;
mod manifest;
mod report;
mod stages;

pub use config::{
    EncoderSection, EvalSection, PipelineConfig, TrainSection, WalkSection, WindowSection,
};
pub use manifest::{bytes_sha256, file_sha256, input_hashes, Manifest, StageRecord};
pub use report::{emit_report, render_fold_chart, render_loss_chart, render_report_text};
pub use stages::{run_pipeline, PipelineArtifacts, StageOutcome};

use crate::connectome::ConnectomeError;
use crate::evalkit::EvalError;
use crate::tempwalk::WalkError;
use crate::trainer::TrainError;
use std::fmt;

/// Machine-readable failure class; doubles as the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    /// Bad inputs or configuration. Exit code 1.
    Validation = 1,
    /// I/O or numerical failure at run time. Exit code 2.
    Runtime = 2,
    /// The requested protocol cannot be satisfied by the data. Exit code 3.
    Infeasible = 3,
}

/// A stage failure carrying the stage name and an exit-code class.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: String,
    pub code: ErrorCode,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &str, code: ErrorCode, message: impl Into<String>) -> Self {
        PipelineError {
            stage: stage.to_string(),
            code,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.code as i32
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stage {} failed ({:?}): {}",
            self.stage, self.code, self.message
        )
    }
}

impl std::error::Error for PipelineError {}

pub fn connectome_code(err: &ConnectomeError) -> ErrorCode {
    match err {
        ConnectomeError::Io(_) => ErrorCode::Runtime,
        _ => ErrorCode::Validation,
    }
}

pub fn walk_code(err: &WalkError) -> ErrorCode {
    match err {
        WalkError::Io(_) => ErrorCode::Runtime,
        _ => ErrorCode::Validation,
    }
}

pub fn train_code(err: &TrainError) -> ErrorCode {
    match err {
        TrainError::NonFiniteLoss { .. } | TrainError::Io(_) => ErrorCode::Runtime,
        TrainError::Encoder(crate::encoder::EncoderError::Io(_)) => ErrorCode::Runtime,
        TrainError::Walk(e) => walk_code(e),
        _ => ErrorCode::Validation,
    }
}

pub fn eval_code(err: &EvalError) -> ErrorCode {
    match err {
        EvalError::InfeasibleStratification { .. } | EvalError::DegenerateFit => {
            ErrorCode::Infeasible
        }
        EvalError::Io(_) => ErrorCode::Runtime,
        _ => ErrorCode::Validation,
    }
}

/// Attach a stage name and exit-code class to a module error.
pub trait StageContext<T, E: fmt::Display> {
    fn in_stage(self, stage: &str, code: fn(&E) -> ErrorCode) -> Result<T, PipelineError>;
}

impl<T, E: fmt::Display> StageContext<T, E> for Result<T, E> {
    fn in_stage(self, stage: &str, code: fn(&E) -> ErrorCode) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, code(&e), e.to_string()))
    }
}
