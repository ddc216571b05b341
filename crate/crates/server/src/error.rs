use std::path::{Path, PathBuf};
use thiserror::Error;
use wayfind_core::error::{AgentError, AnalysisError, BuildingError, QuestionnaireError, SimError, TelemetryError};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid participant id {0:?}")]
    InvalidParticipant(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Building(#[from] BuildingError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
    #[error("{0}")]
    Usage(String),
}

impl ServerError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ServerError::Io { path: path.to_path_buf(), source }
    }
}
