//! Fixed-tick kinematic simulation of one participant and the assignment
//! state machine.

use crate::building::{BuildingSpec, FloorId, PlacedPose, WallSegment, ZonePurpose, EXIT_FLOOR};
use crate::error::SimError;
use crate::geometry::{normalize_deg, Vec2, Vec3};
use crate::navmesh::{build_navmesh, NavMesh};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const TICK_MS: u64 = 20;
pub const SAMPLE_EVERY_TICKS: u64 = 5;
pub const SAMPLE_INTERVAL_MS: u64 = TICK_MS * SAMPLE_EVERY_TICKS;
pub const WALK_SPEED_CM_S: f64 = 140.0;
pub const GOAL_RADIUS_CM: f64 = 80.0;
pub const GAZE_RANGE_CM: f64 = 3000.0;
pub const EYE_HEIGHT_MIN_CM: f64 = 120.0;
pub const EYE_HEIGHT_MAX_CM: f64 = 220.0;
pub const ALARM_TEXT: &str =
    "Attention, please leave the building using the emergency exits as indicated. Do not use the elevators.";

/// Plan distance covered in one tick at walking speed.
pub fn step_length_cm() -> f64 {
    WALK_SPEED_CM_S * TICK_MS as f64 / 1000.0
}

/// Building plus the derived structures every session needs.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: BuildingSpec,
    pub mesh: NavMesh,
    walls: BTreeMap<FloorId, Vec<WallSegment>>,
    fixture_hash: String,
}

impl World {
    pub fn new(spec: BuildingSpec) -> Result<World, SimError> {
        let mesh = build_navmesh(&spec)?;
        let mut walls = BTreeMap::new();
        for id in spec.floor_ids() {
            walls.insert(id, spec.wall_segments(id)?);
        }
        let fixture_hash = spec.fixture_hash();
        Ok(World { spec, mesh, walls, fixture_hash })
    }

    pub fn ceg() -> Result<World, SimError> {
        World::new(crate::building::ceg_fixture())
    }

    pub fn walls(&self, floor: FloorId) -> &[WallSegment] {
        self.walls.get(&floor).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn fixture_hash(&self) -> &str {
        &self.fixture_hash
    }

    pub fn floor_z(&self, floor: FloorId) -> f64 {
        self.mesh.floor_z(floor).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Eye position: plan point plus feet elevation plus eye height.
    pub pos: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub eye_height_cm: f64,
    pub moving: bool,
    pub floor: FloorId,
    /// Stair link currently being traversed.
    pub stair: Option<usize>,
}

impl AgentState {
    pub fn feet_z(&self) -> f64 {
        self.pos.z - self.eye_height_cm
    }

    pub fn xy(&self) -> Vec2 {
        self.pos.xy()
    }

    pub fn forward(&self) -> Vec3 {
        let (y, p) = (self.yaw.to_radians(), self.pitch.to_radians());
        Vec3::new(p.cos() * y.cos(), p.cos() * y.sin(), p.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputFrame {
    pub move_held: bool,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl InputFrame {
    pub fn idle(yaw: f64) -> Self {
        InputFrame { move_held: false, yaw, pitch: 0.0, roll: 0.0 }
    }

    pub fn walk(yaw: f64) -> Self {
        InputFrame { move_held: true, yaw, pitch: 0.0, roll: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()) {
            return Err(SimError::InvalidInput("non-finite angle".into()));
        }
        if !(-89.0..=89.0).contains(&self.pitch) {
            return Err(SimError::InvalidInput(format!("pitch {} outside [-89, 89]", self.pitch)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Room,
    AnyExit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: u8,
    pub start_label: String,
    pub goal_label: String,
    pub goal_kind: GoalKind,
    pub trigger_zone: String,
    pub message: String,
}

/// The four-assignment protocol of the study building.
pub fn ceg_assignments() -> Vec<Assignment> {
    let room = |id: u8, from: &str, to: &str, zone: &str| Assignment {
        id,
        start_label: from.to_string(),
        goal_label: to.to_string(),
        goal_kind: GoalKind::Room,
        trigger_zone: zone.to_string(),
        message: format!("Walk from Room {from} to Room {to}."),
    };
    vec![
        room(1, "4.02", "4.99", "spawn-4.02"),
        room(2, "4.99", "2.01", "trigger-2"),
        room(3, "2.01", "4.64", "trigger-3"),
        Assignment {
            id: 4,
            start_label: "4.64".into(),
            goal_label: "any exit".into(),
            goal_kind: GoalKind::AnyExit,
            trigger_zone: "trigger-4".into(),
            message: ALARM_TEXT.into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t_ms: u64,
    pub event: String,
    pub detail: String,
}

impl SessionEvent {
    /// `event detail`, or just `event` when the detail is empty.
    pub fn label(&self) -> String {
        if self.detail.is_empty() {
            self.event.clone()
        } else {
            format!("{} {}", self.event, self.detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    /// Index of the active assignment; equal to `assignments.len()` when finished.
    pub assignment_index: usize,
    pub assignments: Vec<Assignment>,
    pub alarm_active: bool,
    pub clock_ms: u64,
    pub rng_seed: u64,
    pub event_log: Vec<SessionEvent>,
    pub exit_reached: Option<String>,
    inside_zones: BTreeSet<String>,
}

impl SessionState {
    pub fn finished(&self) -> bool {
        self.assignment_index >= self.assignments.len()
    }

    pub fn active(&self) -> Option<&Assignment> {
        self.assignments.get(self.assignment_index)
    }

    /// 1-based id of the active assignment, or of the last one once finished.
    pub fn assignment_id(&self) -> u8 {
        self.active()
            .or_else(|| self.assignments.last())
            .map(|a| a.id)
            .unwrap_or(0)
    }

    pub fn tick(&self) -> u64 {
        self.clock_ms / TICK_MS
    }

    pub fn is_sample_tick(&self) -> bool {
        self.clock_ms % SAMPLE_INTERVAL_MS == 0
    }

    /// Events logged at the current clock.
    pub fn events_now(&self) -> impl Iterator<Item = &SessionEvent> {
        let t = self.clock_ms;
        self.event_log.iter().rev().take_while(move |e| e.t_ms == t)
    }

    fn log(&mut self, event: &str, detail: impl Into<String>) -> SessionEvent {
        let e = SessionEvent { t_ms: self.clock_ms, event: event.to_string(), detail: detail.into() };
        self.event_log.push(e.clone());
        e
    }

    fn start_active(&mut self) -> Vec<SessionEvent> {
        let mut out = Vec::new();
        if let Some(a) = self.active().cloned() {
            out.push(self.log("assignment_start", a.id.to_string()));
            if a.goal_kind == GoalKind::AnyExit && !self.alarm_active {
                self.alarm_active = true;
                out.push(self.log("alarm_on", ALARM_TEXT));
            }
        }
        out
    }
}

/// Start a session at Room 4.02 facing down the corridor.
pub fn init_session(world: &World, eye_height_cm: f64, seed: u64) -> Result<(AgentState, SessionState), SimError> {
    let place = world.spec.lookup_place("4.02")?;
    init_session_at(world, eye_height_cm, seed, 1, place, 0.0)
}

/// Start a session with assignment `assignment_id` active at an arbitrary place.
pub fn init_session_at(
    world: &World,
    eye_height_cm: f64,
    seed: u64,
    assignment_id: u8,
    place: PlacedPose,
    yaw: f64,
) -> Result<(AgentState, SessionState), SimError> {
    if !(EYE_HEIGHT_MIN_CM..=EYE_HEIGHT_MAX_CM).contains(&eye_height_cm) || !eye_height_cm.is_finite() {
        return Err(SimError::EyeHeight(eye_height_cm));
    }
    let assignments = ceg_assignments();
    let index = assignments
        .iter()
        .position(|a| a.id == assignment_id)
        .ok_or_else(|| SimError::InvalidInput(format!("unknown assignment {assignment_id}")))?;
    let xy = world.mesh.project_to_walkable(place.floor, place.xy());
    let z = world.floor_z(place.floor);
    let agent = AgentState {
        pos: Vec3::with_xy(xy, z + eye_height_cm),
        yaw: normalize_deg(yaw),
        pitch: 0.0,
        roll: 0.0,
        eye_height_cm,
        moving: false,
        floor: place.floor,
        stair: None,
    };
    let mut session = SessionState {
        assignment_index: index,
        assignments,
        alarm_active: false,
        clock_ms: 0,
        rng_seed: seed,
        event_log: Vec::new(),
        exit_reached: None,
        inside_zones: BTreeSet::new(),
    };
    session.start_active();
    session.inside_zones = zones_containing(world, &agent);
    Ok((agent, session))
}

fn zones_containing(world: &World, agent: &AgentState) -> BTreeSet<String> {
    if agent.stair.is_some() {
        return BTreeSet::new();
    }
    world
        .spec
        .zones
        .iter()
        .filter(|z| z.floor == agent.floor && z.contains(agent.xy()))
        .map(|z| z.id.clone())
        .collect()
}

/// Advance one fixed tick. Returns the events logged during the tick.
pub fn step(world: &World, agent: &mut AgentState, session: &mut SessionState, input: &InputFrame) -> Vec<SessionEvent> {
    agent.yaw = normalize_deg(input.yaw);
    agent.pitch = input.pitch;
    agent.roll = input.roll;
    agent.moving = input.move_held;
    if input.move_held {
        locomote(world, agent);
    }
    session.clock_ms += TICK_MS;
    if session.is_sample_tick() {
        evaluate_zone_entry(world, session, agent)
    } else {
        Vec::new()
    }
}

fn locomote(world: &World, agent: &mut AgentState) {
    let mesh = &world.mesh;
    let step = step_length_cm();
    let p = agent.xy();
    let d = Vec2::from_heading_deg(agent.yaw) * step;
    let q = p + d;
    let guard = step + 1e-9;

    if let Some(li) = agent.stair {
        let link = &mesh.stair_links()[li];
        let t = link.param(q);
        if t < 0.0 || t > 1.0 {
            let floor = if t < 0.0 { link.lower_floor } else { link.upper_floor };
            if let Some(r) = guarded_projection(mesh, floor, p, d, guard) {
                agent.stair = None;
                agent.floor = floor;
                set_plan(agent, r, world.floor_z(floor));
                return;
            }
        }
        let r = link.clamp_lateral(q);
        let r = if link.param(r) < 0.0 || link.param(r) > 1.0 { p } else { r };
        agent.floor = if link.param(r) < 0.5 { link.lower_floor } else { link.upper_floor };
        set_plan(agent, r, link.z_at(r));
        return;
    }

    for (li, link) in mesh.stair_links().iter().enumerate() {
        let entering = if agent.floor == link.lower_floor {
            link.param(p) <= 0.0 && link.param(q) > 0.0 && -link.param(p) * link.axis_length() <= guard
        } else if agent.floor == link.upper_floor {
            link.param(p) >= 1.0 && link.param(q) < 1.0 && (link.param(p) - 1.0) * link.axis_length() <= guard
        } else {
            false
        };
        if entering && link.lateral(q).abs() <= link.half_width_cm && link.lateral(p).abs() <= link.half_width_cm + guard
        {
            agent.stair = Some(li);
            set_plan(agent, q, link.z_at(q));
            return;
        }
    }

    if let Some(r) = guarded_projection(mesh, agent.floor, p, d, guard) {
        let z = world.floor_z(agent.floor);
        set_plan(agent, r, z);
    }
}

/// Project `p + d` onto the floor; halve the step if the projection jumps
/// farther than one step, and give up (stay put) if that also fails.
fn guarded_projection(mesh: &NavMesh, floor: FloorId, p: Vec2, d: Vec2, guard: f64) -> Option<Vec2> {
    for scale in [1.0, 0.5] {
        let r = mesh.project_to_walkable(floor, p + d * scale);
        if r.distance(p) <= guard && mesh.contains(floor, r) {
            return Some(r);
        }
    }
    None
}

fn set_plan(agent: &mut AgentState, p: Vec2, feet_z: f64) {
    agent.pos = Vec3::with_xy(p, feet_z + agent.eye_height_cm);
}

/// Apply trigger-zone and goal rules for the agent's current position.
pub fn evaluate_zone_entry(world: &World, session: &mut SessionState, agent: &AgentState) -> Vec<SessionEvent> {
    let mut out = Vec::new();
    let now_inside = zones_containing(world, agent);
    let entered: Vec<String> = now_inside.difference(&session.inside_zones).cloned().collect();
    session.inside_zones = now_inside;
    if session.finished() {
        return out;
    }
    let active = session.active().cloned().expect("active assignment");
    let reached = match active.goal_kind {
        GoalKind::Room => world.spec.room(&active.goal_label).is_some_and(|r| {
            agent.stair.is_none()
                && agent.floor == r.floor
                && agent.xy().distance(r.door_pos) <= GOAL_RADIUS_CM
        }),
        GoalKind::AnyExit => false,
    };
    let exit = if active.goal_kind == GoalKind::AnyExit && agent.stair.is_none() && agent.floor == EXIT_FLOOR {
        world
            .spec
            .exits
            .iter()
            .find(|e| world.spec.zone(&e.zone).is_some_and(|z| z.contains(agent.xy())))
            .map(|e| e.label.clone())
    } else {
        None
    };
    if reached || exit.is_some() {
        out.push(session.log("assignment_complete", active.id.to_string()));
        if let Some(label) = exit {
            out.push(session.log("exit_reached", label.clone()));
            session.exit_reached = Some(label);
        }
        session.assignment_index += 1;
        out.extend(session.start_active());
        return out;
    }
    for zone in entered {
        let later = session
            .assignments
            .iter()
            .skip(session.assignment_index + 1)
            .find(|a| a.trigger_zone == zone);
        if let Some(a) = later {
            let detail = a.id.to_string();
            out.push(session.log("trigger_blocked", detail));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GazeHit {
    pub point: Option<Vec3>,
    pub surface_id: Option<String>,
    /// `wall`, `room_door`, a sign kind, or `none`.
    pub target_kind: String,
    pub target: Option<String>,
    pub distance_cm: Option<f64>,
}

impl GazeHit {
    pub fn none() -> Self {
        GazeHit { point: None, surface_id: None, target_kind: "none".into(), target: None, distance_cm: None }
    }

    /// Telemetry label: `room_door:4.99`, `exit_sign:C`, `wall:f4w12` or `none`.
    pub fn label(&self) -> String {
        match (&self.target, &self.surface_id) {
            (Some(t), _) if self.target_kind != "wall" => format!("{}:{}", self.target_kind, t),
            (_, Some(s)) => format!("wall:{s}"),
            _ => "none".to_string(),
        }
    }
}

/// Head ray against the current floor's walls (vertical planes through
/// boundary segments, seen from the walkable side).
pub fn gaze_raycast(world: &World, agent: &AgentState) -> GazeHit {
    if agent.stair.is_some() {
        return GazeHit::none();
    }
    let eye = agent.pos;
    let fwd = agent.forward();
    let plan = Vec2::new(fwd.x, fwd.y);
    let mut best: Option<(f64, &WallSegment)> = None;
    for w in world.walls(agent.floor) {
        let e = w.segment.b - w.segment.a;
        if e.cross(plan) >= 0.0 {
            continue;
        }
        if let Some(t) = w.segment.ray_intersection(eye.xy(), plan) {
            if t <= GAZE_RANGE_CM && best.map_or(true, |(b, _)| t < b) {
                best = Some((t, w));
            }
        }
    }
    let Some((t, wall)) = best else {
        return GazeHit::none();
    };
    let point = eye + fwd * t;
    let decal = wall
        .decals
        .iter()
        .filter(|d| d.center.distance(point.xy()) <= d.half_width)
        .min_by(|a, b| a.center.distance(point.xy()).total_cmp(&b.center.distance(point.xy())));
    match decal {
        Some(d) => GazeHit {
            point: Some(point),
            surface_id: Some(wall.surface_id.clone()),
            target_kind: d.kind.clone(),
            target: Some(d.target.clone()),
            distance_cm: Some(t),
        },
        None => GazeHit {
            point: Some(point),
            surface_id: Some(wall.surface_id.clone()),
            target_kind: "wall".into(),
            target: None,
            distance_cm: Some(t),
        },
    }
}

/// Wide-intersection and central zones the agent is in (analysis helper).
pub fn zones_of_purpose(world: &World, agent: &AgentState, purpose: ZonePurpose) -> Vec<String> {
    world
        .spec
        .zones_with(purpose)
        .filter(|z| agent.stair.is_none() && z.floor == agent.floor && z.contains(agent.xy()))
        .map(|z| z.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> World {
        World::ceg().unwrap()
    }

    #[test]
    fn eye_height_sets_viewpoint() {
        let w = world();
        let (a, s) = init_session(&w, 170.0, 1).unwrap();
        assert_eq!(a.floor, 4);
        assert!((a.pos.z - (w.floor_z(4) + 170.0)).abs() < 1e-9);
        assert_eq!(s.event_log[0].label(), "assignment_start 1");
        assert!(init_session(&w, 100.0, 1).is_err());
    }

    #[test]
    fn idle_input_keeps_position() {
        let w = world();
        let (mut a, mut s) = init_session(&w, 170.0, 1).unwrap();
        let p = a.pos;
        for i in 0..50 {
            step(&w, &mut a, &mut s, &InputFrame { move_held: false, yaw: i as f64 * 7.0, pitch: 10.0, roll: 3.0 });
        }
        assert_eq!(a.pos, p);
        assert_eq!(a.roll, 3.0);
    }

    #[test]
    fn pitch_outside_range_is_rejected() {
        assert!(InputFrame { move_held: true, yaw: 0.0, pitch: 90.0, roll: 0.0 }.validate().is_err());
        assert!(InputFrame { move_held: true, yaw: f64::NAN, pitch: 0.0, roll: 0.0 }.validate().is_err());
    }

    #[test]
    fn gaze_label_formats() {
        let mut g = GazeHit::none();
        assert_eq!(g.label(), "none");
        g.surface_id = Some("f4w12".into());
        g.target_kind = "wall".into();
        assert_eq!(g.label(), "wall:f4w12");
        g.target_kind = "exit_sign".into();
        g.target = Some("C".into());
        assert_eq!(g.label(), "exit_sign:C");
    }
}
