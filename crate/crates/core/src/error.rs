use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildingError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("no floors")]
    NoFloors,
    #[error("{entity} references unknown {reference}")]
    DanglingReference { entity: String, reference: String },
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("unknown floor {0}")]
    UnknownFloor(u8),
}

#[derive(Debug, Error)]
pub enum NavError {
    #[error("triangulation failed for polygon {0}")]
    Triangulation(String),
    #[error("unknown floor {0}")]
    UnknownFloor(u8),
    #[error("point ({x:.1}, {y:.1}) on floor {floor} is not on the walkable mesh")]
    OffMesh { floor: u8, x: f64, y: f64 },
    #[error("goal unreachable from start")]
    Unreachable,
    #[error(transparent)]
    Building(#[from] BuildingError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("eye height {0} cm outside [120, 220]")]
    EyeHeight(f64),
    #[error("invalid input frame: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Building(#[from] BuildingError),
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to overwrite existing log {0}")]
    Exists(PathBuf),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("timestamp regression at row {row}")]
    NonMonotone { row: usize },
    #[error("bad cell at row {row}, column {column}: {message}")]
    BadCell { row: usize, column: String, message: String },
    #[error("trace fixture hash {found} does not match building {expected}")]
    FixtureMismatch { expected: String, found: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("goal {0} unreachable")]
    Unreachable(String),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Building(#[from] BuildingError),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unmatched assignment events: {0}")]
    UnmatchedEvents(String),
    #[error("split has no samples on a floor: {0}")]
    EmptySplit(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Nav(#[from] NavError),
}

#[derive(Debug, Error)]
pub enum QuestionnaireError {
    #[error("instrument schema violation: {0}")]
    Schema(String),
    #[error("subscale {0} has no weight")]
    MissingWeight(String),
    #[error("answer {value} to item {item} outside {min}..={max}")]
    OutOfRange { item: String, value: i64, min: i64, max: i64 },
    #[error("missing answer for item {0}")]
    MissingItem(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("reports mix instruments {0} and {1}")]
    MixedInstruments(String, String),
    #[error("no reports to summarize")]
    Empty,
    #[error("unknown instrument {0}")]
    UnknownInstrument(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
