//! Wayfinding experiment engine: building model, navigation mesh,
//! simulation, telemetry, scripted agents, analysis and questionnaires.

pub mod agents;
pub mod analysis;
pub mod building;
pub mod error;
pub mod geometry;
pub mod navmesh;
pub mod questionnaires;
pub mod region;
pub mod sim;
pub mod telemetry;
