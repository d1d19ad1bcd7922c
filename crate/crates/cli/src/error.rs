use std::process::ExitCode;

use hegrad_core::casestudies::CaseStudyError;
use hegrad_core::ioi::IoiError;
use hegrad_core::problem::ProblemError;
use hegrad_core::protocol::ProtocolError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    /// The problem does not meet the chosen protocol's requirements.
    #[error("{0}")]
    Gate(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    GoldenMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Gate(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::GoldenMismatch(_) => 5,
        })
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Problem(p) => p.into(),
            ProtocolError::NotAffine { .. } => CliError::Gate(e.to_string()),
            ProtocolError::KeyCount { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<IoiError> for CliError {
    fn from(e: IoiError) -> Self {
        match e {
            IoiError::Io(_) => CliError::Io(e.to_string()),
            IoiError::Problem(p) => p.into(),
            IoiError::NotQuadratic { .. } => CliError::Gate(e.to_string()),
            IoiError::ShadowRejected(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CaseStudyError> for CliError {
    fn from(e: CaseStudyError) -> Self {
        match e {
            CaseStudyError::Problem(p) => p.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
