use std::path::Path;
use thiserror::Error;

/// Pipeline stage, used for messages and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Mesh,
    Solve,
    Extract,
    Enclose,
    Output,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Mesh => "mesh",
            Stage::Solve => "solve",
            Stage::Extract => "extract",
            Stage::Enclose => "enclose",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {msg}", stage.name())]
    Stage { stage: Stage, msg: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Stage { stage: Stage::Validate, msg: msg.into() }
    }

    pub fn stage(stage: Stage, msg: impl Into<String>) -> Self {
        CliError::Stage { stage, msg: msg.into() }
    }

    pub fn core(stage: Stage, e: thermo_enclosure_core::Error) -> Self {
        CliError::Stage { stage, msg: e.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 validation, 3 solver, 4 extraction, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { stage: Stage::Validate | Stage::Mesh, .. } => 2,
            CliError::Stage { stage: Stage::Solve, .. } => 3,
            CliError::Stage { stage: Stage::Extract | Stage::Enclose, .. } => 4,
            _ => 1,
        }
    }
}
