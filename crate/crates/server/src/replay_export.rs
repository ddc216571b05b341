//! Replay document consumed by the browser viewer.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use wayfind_core::sim::World;
use wayfind_core::telemetry::SessionLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t_ms: u64,
    /// Eye position in cm.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub floor: Option<u8>,
    pub yaw: f64,
    pub assignment: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub floor: Option<u8>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvent {
    pub t_ms: u64,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayDocument {
    pub version: u32,
    pub participant_id: String,
    pub fixture_hash: String,
    pub duration_ms: u64,
    pub floors: Vec<u8>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub gaze: Vec<GazePoint>,
    pub events: Vec<ReplayEvent>,
}

/// One trajectory point per telemetry row; gaze points for rows with a hit.
pub fn export(world: &World, log: &SessionLog) -> ReplayDocument {
    let floor_of = |z: f64| world.spec.floor_below_eye(z);
    let trajectory: Vec<TrajectoryPoint> = log
        .samples
        .iter()
        .map(|s| TrajectoryPoint {
            t_ms: s.t_ms,
            x: s.pos.x,
            y: s.pos.y,
            z: s.pos.z,
            floor: floor_of(s.pos.z),
            yaw: s.yaw_deg,
            assignment: s.assignment,
        })
        .collect();
    // Gaze points are at wall height, so their floor comes from the viewer's eye.
    let gaze = log
        .samples
        .iter()
        .filter_map(|s| {
            s.gaze.map(|g| GazePoint {
                t_ms: s.t_ms,
                x: g.x,
                y: g.y,
                z: g.z,
                floor: floor_of(s.pos.z),
                target: s.gaze_target.clone(),
            })
        })
        .collect();
    let floors: BTreeSet<u8> = trajectory.iter().filter_map(|p| p.floor).collect();
    ReplayDocument {
        version: 1,
        participant_id: log.participant_id.clone(),
        fixture_hash: world.fixture_hash().to_string(),
        duration_ms: log.samples.last().map_or(0, |s| s.t_ms),
        floors: floors.into_iter().collect(),
        trajectory,
        gaze,
        events: log
            .events
            .iter()
            .map(|e| ReplayEvent { t_ms: e.t_ms, event: e.event.clone(), detail: e.detail.clone() })
            .collect(),
    }
}
