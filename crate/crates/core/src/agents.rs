//! Scripted wayfinding policies driving the simulation through input frames.

use crate::building::{FloorId, PlacedPose, WalkableKind, ZonePurpose, EXIT_FLOOR};
use crate::error::AgentError;
use crate::geometry::{Vec2, Vec3};
use crate::navmesh::{NavMesh, PathResult, StairLink};
use crate::sim::{step_length_cm, AgentState, Assignment, GoalKind, InputFrame, World};
use crate::telemetry::SessionRun;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_NOISE_CM: f64 = 30.0;
pub const MAX_NOISE_CM: f64 = 100.0;
/// Waypoints this close count as reached once the next one is in sight.
pub const WAYPOINT_REACHED_CM: f64 = 20.0;
/// Spacing of interior route points that receive lateral jitter.
const DENSIFY_CM: f64 = 300.0;
/// Distance of the approach and departure points from a stair gate.
const GATE_APPROACH_CM: f64 = 40.0;
/// Ticks without progress before the follower re-plans to its target.
const STUCK_TICKS: u32 = 50;
/// Default cap on simulated session length.
pub const DEFAULT_MAX_SESSION_MS: u64 = 3_600_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    CentralPoint,
    Direction,
    Floor,
    NearestExit,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::CentralPoint, PolicyKind::Direction, PolicyKind::Floor, PolicyKind::NearestExit];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::CentralPoint => "central_point",
            PolicyKind::Direction => "direction",
            PolicyKind::Floor => "floor",
            PolicyKind::NearestExit => "nearest_exit",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown policy {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub jitter_seed: u64,
    pub waypoint_noise_cm: f64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, jitter_seed: u64) -> Self {
        PolicySpec { kind, jitter_seed, waypoint_noise_cm: DEFAULT_NOISE_CM }
    }

    pub fn noiseless(kind: PolicyKind) -> Self {
        PolicySpec { kind, jitter_seed: 0, waypoint_noise_cm: 0.0 }
    }
}

/// One route point at feet level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pos: Vec3,
    pub floor: FloorId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub waypoints: Vec<Waypoint>,
    /// Length of the underlying (unjittered) policy path.
    pub planned_length_cm: f64,
    /// Stair links in traversal order.
    pub stairs: Vec<usize>,
    /// Exit chosen by an evacuation route.
    pub exit: Option<String>,
}

/// Goal pose of an assignment; `None` for the evacuation.
fn goal_pose(world: &World, a: &Assignment) -> Result<Option<PlacedPose>, AgentError> {
    match a.goal_kind {
        GoalKind::Room => Ok(Some(world.spec.lookup_place(&a.goal_label)?)),
        GoalKind::AnyExit => Ok(None),
    }
}

fn staircase_x(world: &World, label: &str) -> f64 {
    let s = world.spec.staircases.iter().find(|s| s.label == label).expect("known staircase");
    s.ramp.iter().map(|p| p.x).sum::<f64>() / s.ramp.len() as f64
}

fn nearest_staircase(world: &World, x: f64) -> String {
    let mut labels: Vec<&str> = world.spec.staircases.iter().map(|s| s.label.as_str()).collect();
    labels.sort_unstable();
    labels
        .into_iter()
        .min_by(|a, b| (staircase_x(world, a) - x).abs().total_cmp(&(staircase_x(world, b) - x).abs()))
        .expect("building has staircases")
        .to_string()
}

fn path_with(world: &World, a: &PlacedPose, b: &PlacedPose, stair: Option<&str>) -> Result<PathResult, AgentError> {
    let r = match stair {
        Some(label) => world.mesh.shortest_path_with(a, b, &|_, l: &StairLink| l.staircase == label),
        None => world.mesh.shortest_path(a, b),
    };
    r.map_err(AgentError::from)
}

fn concat(mut first: PathResult, second: PathResult) -> PathResult {
    let offset = first.waypoints.len().saturating_sub(1);
    first.waypoints.extend(second.waypoints.into_iter().skip(1));
    first.stairs.extend(second.stairs.into_iter().map(|mut s| {
        s.start_index += offset;
        s
    }));
    for f in second.floors_visited {
        if first.floors_visited.last() != Some(&f) {
            first.floors_visited.push(f);
        }
    }
    first.length_cm = crate::geometry::polyline_length(&first.waypoints);
    first
}

fn via(world: &World, a: &PlacedPose, v: &PlacedPose, b: &PlacedPose) -> Result<PathResult, AgentError> {
    Ok(concat(path_with(world, a, v, None)?, path_with(world, v, b, None)?))
}

/// Main corridor polygon nearest to a point (index into the floor's walkables).
fn main_corridor_of(world: &World, floor: FloorId, p: Vec2) -> Option<usize> {
    let f = world.spec.floor(floor)?;
    f.walkable
        .iter()
        .enumerate()
        .filter(|(_, w)| w.kind == WalkableKind::MainCorridor)
        .min_by(|(_, a), (_, b)| ring_distance(&a.polygon, p).total_cmp(&ring_distance(&b.polygon, p)))
        .map(|(i, _)| i)
}

fn ring_distance(ring: &[Vec2], p: Vec2) -> f64 {
    if crate::geometry::point_in_ring(p, ring) {
        return 0.0;
    }
    (0..ring.len())
        .map(|i| crate::geometry::Segment::new(ring[i], ring[(i + 1) % ring.len()]).distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

fn cross_corridor_centers(world: &World, floor: FloorId) -> Vec<Vec2> {
    world
        .spec
        .floor(floor)
        .map(|f| {
            f.walkable
                .iter()
                .filter(|w| w.kind == WalkableKind::CrossCorridor)
                .map(|w| crate::geometry::centroid(&w.polygon))
                .collect()
        })
        .unwrap_or_default()
}

/// Policy path (before densification and jitter) from `start` to the goal.
pub fn plan_path(
    world: &World,
    policy: &PolicySpec,
    assignment: &Assignment,
    start: &PlacedPose,
) -> Result<(PathResult, Option<String>), AgentError> {
    let Some(goal) = goal_pose(world, assignment)? else {
        let (label, path) = nearest_exit(world, start)?;
        return Ok((path, Some(label)));
    };
    let unreachable = || AgentError::Unreachable(assignment.goal_label.clone());
    let path = if start.floor != goal.floor {
        match policy.kind {
            PolicyKind::Direction => {
                let s = nearest_staircase(world, goal.point.x);
                path_with(world, start, &goal, Some(&s))?
            }
            PolicyKind::Floor => {
                let s = nearest_staircase(world, start.point.x);
                path_with(world, start, &goal, Some(&s))?
            }
            PolicyKind::CentralPoint => {
                let c = central_pose(world).ok_or_else(unreachable)?;
                via(world, start, &c, &goal)?
            }
            PolicyKind::NearestExit => path_with(world, start, &goal, None)?,
        }
    } else {
        let switch = main_corridor_of(world, start.floor, start.xy()) != main_corridor_of(world, goal.floor, goal.xy());
        match policy.kind {
            PolicyKind::Direction if switch => {
                let (x0, x1) = (start.point.x, goal.point.x);
                let first = cross_corridor_centers(world, start.floor)
                    .into_iter()
                    .filter(|c| (c.x - x0) * (x1 - x0) > 0.0 && (c.x - x0).abs() < (x1 - x0).abs())
                    .min_by(|a, b| (a.x - x0).abs().total_cmp(&(b.x - x0).abs()));
                match first {
                    Some(c) => {
                        let v = PlacedPose { floor: start.floor, point: Vec3::with_xy(c, start.point.z) };
                        via(world, start, &v, &goal)?
                    }
                    None => path_with(world, start, &goal, None)?,
                }
            }
            PolicyKind::CentralPoint if switch => {
                let mid = 0.5 * (start.point.x + goal.point.x);
                let wide = world
                    .spec
                    .zones_with(ZonePurpose::WideIntersection)
                    .filter(|z| z.floor == start.floor)
                    .map(|z| world.mesh.project_to_walkable(z.floor, z.centroid()))
                    .min_by(|a, b| (a.x - mid).abs().total_cmp(&(b.x - mid).abs()));
                match wide {
                    Some(c) => {
                        let v = PlacedPose { floor: start.floor, point: Vec3::with_xy(c, start.point.z) };
                        via(world, start, &v, &goal)?
                    }
                    None => path_with(world, start, &goal, None)?,
                }
            }
            _ => path_with(world, start, &goal, None)?,
        }
    };
    Ok((path, None))
}

fn central_pose(world: &World) -> Option<PlacedPose> {
    let z = world.spec.zones_with(ZonePurpose::CentralPoint).next()?;
    let c = world.mesh.project_to_walkable(z.floor, z.centroid());
    Some(PlacedPose { floor: z.floor, point: Vec3::with_xy(c, world.floor_z(z.floor)) })
}

/// Exit with the shortest path from `start`; ties go to the smaller label.
pub fn nearest_exit(world: &World, start: &PlacedPose) -> Result<(String, PathResult), AgentError> {
    let mut exits: Vec<_> = world.spec.exits.iter().collect();
    exits.sort_by(|a, b| a.label.cmp(&b.label));
    let mut best: Option<(String, PathResult)> = None;
    for e in exits {
        let goal = PlacedPose { floor: EXIT_FLOOR, point: Vec3::with_xy(e.position, world.floor_z(EXIT_FLOOR)) };
        let Ok(p) = world.mesh.shortest_path(start, &goal) else { continue };
        if best.as_ref().map_or(true, |(_, b)| p.length_cm < b.length_cm) {
            best = Some((e.label.clone(), p));
        }
    }
    best.ok_or_else(|| AgentError::Unreachable("any exit".into()))
}

/// Exit lengths from `start`, sorted by label.
pub fn exit_lengths(world: &World, start: &PlacedPose) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = world
        .spec
        .exits
        .iter()
        .filter_map(|e| {
            let goal = PlacedPose { floor: EXIT_FLOOR, point: Vec3::with_xy(e.position, world.floor_z(EXIT_FLOOR)) };
            world.mesh.shortest_path(start, &goal).ok().map(|p| (e.label.clone(), p.length_cm))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn visible(mesh: &NavMesh, floor: FloorId, a: Vec2, b: Vec2) -> bool {
    let n = (a.distance(b) / 5.0).ceil().max(1.0) as usize;
    (0..=n).all(|i| mesh.contains(floor, a.lerp(b, i as f64 / n as f64)))
}

/// Turn a policy path into a followable, jittered waypoint route.
pub fn plan_route(
    world: &World,
    policy: &PolicySpec,
    assignment: &Assignment,
    start: &PlacedPose,
) -> Result<Route, AgentError> {
    if !(0.0..=MAX_NOISE_CM).contains(&policy.waypoint_noise_cm) {
        return Err(AgentError::Sim(crate::error::SimError::InvalidInput(format!(
            "waypoint noise {} outside [0, {MAX_NOISE_CM}]",
            policy.waypoint_noise_cm
        ))));
    }
    let (path, exit) = plan_path(world, policy, assignment, start)?;
    Ok(route_from_path(world, policy, assignment.id, start, &path, exit))
}

/// Densify, jitter and add stair approach points to an arbitrary mesh path.
pub fn route_from_path(
    world: &World,
    policy: &PolicySpec,
    assignment_id: u8,
    start: &PlacedPose,
    path: &PathResult,
    exit: Option<String>,
) -> Route {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.jitter_seed ^ (u64::from(assignment_id) << 56));
    let mesh = &world.mesh;
    let links = mesh.stair_links();
    let floor_of = |p: Vec3| world.spec.floor_at_elevation(p.z, 1e-6);

    // Split the path into floor legs and stair traversals.
    let mut out: Vec<Waypoint> = Vec::new();
    let mut i = 0;
    let mut stairs = Vec::new();
    let mut stair_iter = path.stairs.iter().peekable();
    while i < path.waypoints.len() {
        let leg_end = stair_iter.peek().map_or(path.waypoints.len() - 1, |s| s.start_index);
        let floor = floor_of(path.waypoints[i]).unwrap_or(start.floor);
        let z = path.waypoints[i].z;
        let leg: Vec<Vec2> = path.waypoints[i..=leg_end].iter().map(|p| p.xy()).collect();
        let dense = densify(&leg);
        for (k, p) in dense.iter().enumerate() {
            if k == 0 && i > 0 {
                continue;
            }
            let interior = k > 0 && k + 1 < dense.len() && !leg.contains(p);
            let mut q = *p;
            if interior && policy.waypoint_noise_cm > 0.0 {
                let dir = (dense[k + 1] - dense[k - 1]).normalized();
                let off = rng.gen_range(-policy.waypoint_noise_cm..=policy.waypoint_noise_cm);
                let cand = mesh.project_to_walkable(floor, *p + dir.perp() * off);
                let prev = out.last().map(|w| w.pos.xy()).unwrap_or(*p);
                if visible(mesh, floor, prev, cand) && visible(mesh, floor, cand, dense[k + 1]) {
                    q = cand;
                }
            }
            if out.last().map_or(true, |w| w.pos.xy().distance(q) > 1e-9 || w.floor != floor) {
                out.push(Waypoint { pos: Vec3::with_xy(q, z), floor });
            }
        }
        let Some(st) = stair_iter.next() else { break };
        let link = &links[st.link];
        stairs.push(st.link);
        let ramp: Vec<Vec3> = if st.descending { link.ramp.iter().rev().copied().collect() } else { link.ramp.clone() };
        let (near, far) = (ramp[0], ramp[ramp.len() - 1]);
        let dir_in = (ramp[1].xy() - near.xy()).normalized();
        let dir_out = (far.xy() - ramp[ramp.len() - 2].xy()).normalized();
        let (from_floor, to_floor) = if st.descending {
            (link.upper_floor, link.lower_floor)
        } else {
            (link.lower_floor, link.upper_floor)
        };
        // Approach point before the gate, then the gate itself.
        let approach = near.xy() - dir_in * GATE_APPROACH_CM;
        let gate_wp = out.pop();
        let prev = out.last().map(|w| w.pos.xy());
        if mesh.contains(from_floor, approach) && prev.map_or(true, |p| visible(mesh, from_floor, p, approach)) {
            out.push(Waypoint { pos: Vec3::with_xy(approach, near.z), floor: from_floor });
        }
        out.push(gate_wp.unwrap_or(Waypoint { pos: near, floor: from_floor }));
        for p in &ramp[1..] {
            let fl = floor_of(*p).unwrap_or(to_floor);
            out.push(Waypoint { pos: *p, floor: fl });
        }
        let depart = far.xy() + dir_out * GATE_APPROACH_CM;
        if mesh.contains(to_floor, depart) {
            out.push(Waypoint { pos: Vec3::with_xy(depart, far.z), floor: to_floor });
        }
        i = st.start_index + ramp.len() - 1;
        if i >= path.waypoints.len() - 1 {
            break;
        }
    }
    Route { waypoints: out, planned_length_cm: path.length_cm, stairs, exit }
}

fn densify(leg: &[Vec2]) -> Vec<Vec2> {
    let mut out = Vec::new();
    for w in leg.windows(2) {
        let n = (w[0].distance(w[1]) / DENSIFY_CM).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(w[0].lerp(w[1], k as f64 / n as f64));
        }
    }
    if let Some(l) = leg.last() {
        out.push(*l);
    }
    out
}

/// Waypoint follower state.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub policy: PolicySpec,
    pub route: Route,
    pub index: usize,
    best_dist: f64,
    stalled: u32,
}

impl PolicyState {
    pub fn new(policy: PolicySpec, route: Route) -> Self {
        PolicyState { policy, route, index: 0, best_dist: f64::INFINITY, stalled: 0 }
    }

    pub fn done(&self) -> bool {
        self.index >= self.route.waypoints.len()
    }
}

fn feet(agent: &AgentState) -> Vec3 {
    Vec3::with_xy(agent.xy(), agent.feet_z())
}

/// Next input: face the current waypoint and walk until the route ends.
pub fn policy_step(world: &World, state: &mut PolicyState, agent: &AgentState) -> InputFrame {
    while let Some(w) = state.route.waypoints.get(state.index) {
        let d = feet(agent).distance(w.pos);
        let next_clear = || match state.route.waypoints.get(state.index + 1) {
            Some(n) if agent.stair.is_none() && n.floor == agent.floor && w.floor == agent.floor => {
                visible(&world.mesh, agent.floor, agent.xy(), n.pos.xy())
            }
            _ => true,
        };
        if d <= step_length_cm() || (d <= WAYPOINT_REACHED_CM && next_clear()) {
            state.index += 1;
            state.best_dist = f64::INFINITY;
            state.stalled = 0;
        } else {
            break;
        }
    }
    let Some(target) = state.route.waypoints.get(state.index).copied() else {
        return InputFrame::idle(agent.yaw);
    };
    let d = feet(agent).distance(target.pos);
    if d < state.best_dist - 0.5 {
        state.best_dist = d;
        state.stalled = 0;
    } else {
        state.stalled += 1;
    }
    if state.stalled > STUCK_TICKS && agent.stair.is_none() {
        // Re-plan a straight mesh path to the current target.
        let from = PlacedPose { floor: agent.floor, point: feet(agent) };
        let to = PlacedPose { floor: target.floor, point: target.pos };
        if let Ok(p) = world.mesh.shortest_path(&from, &to) {
            if p.stairs.is_empty() {
                let detour: Vec<Waypoint> =
                    p.waypoints[1..p.waypoints.len() - 1].iter().map(|&pos| Waypoint { pos, floor: agent.floor }).collect();
                let at = state.index;
                state.route.waypoints.splice(at..at, detour);
            }
        }
        state.stalled = 0;
        state.best_dist = f64::INFINITY;
    }
    let target = state.route.waypoints[state.index];
    let delta = target.pos.xy() - agent.xy();
    let yaw = if delta.length() < 1e-9 { agent.yaw } else { delta.heading_deg() };
    InputFrame::walk(yaw)
}

/// Drive one full session with a policy until it finishes or times out.
pub fn run_session(
    world: &World,
    policy: &PolicySpec,
    participant_id: &str,
    eye_height_cm: f64,
    max_ms: u64,
) -> Result<SessionRun, AgentError> {
    let mut run = SessionRun::start(world, participant_id, eye_height_cm, policy.jitter_seed)?;
    drive(world, policy, &mut run, max_ms)?;
    Ok(run)
}

/// Continue an existing run under a policy, re-planning at each assignment start.
pub fn drive(world: &World, policy: &PolicySpec, run: &mut SessionRun, max_ms: u64) -> Result<(), AgentError> {
    let mut planned_for: Option<usize> = None;
    let mut state: Option<PolicyState> = None;
    while !run.finished() && run.session.clock_ms < max_ms {
        if planned_for != Some(run.session.assignment_index) {
            let a = run.session.active().expect("unfinished session").clone();
            let start = PlacedPose { floor: run.agent.floor, point: feet(&run.agent) };
            state = Some(PolicyState::new(*policy, plan_route(world, policy, &a, &start)?));
            planned_for = Some(run.session.assignment_index);
        }
        let st = state.as_mut().expect("route planned");
        let input = policy_step(world, st, &run.agent);
        run.step(world, &input)?;
    }
    Ok(())
}

/// Run `n` sessions cycling through `mix`, each with its own seed.
pub fn generate_cohort(
    world: &World,
    n: usize,
    mix: &[PolicyKind],
    base_seed: u64,
    noise_cm: f64,
) -> Result<Vec<(PolicySpec, SessionRun)>, AgentError> {
    if n == 0 || mix.is_empty() {
        return Err(AgentError::Sim(crate::error::SimError::InvalidInput("empty cohort".into())));
    }
    let specs: Vec<(usize, PolicySpec)> = (0..n)
        .map(|i| {
            let kind = mix[i % mix.len()];
            let seed = base_seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            (i, PolicySpec { kind, jitter_seed: seed, waypoint_noise_cm: noise_cm })
        })
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n);
    let mut results: Vec<Option<Result<(PolicySpec, SessionRun), AgentError>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = specs.chunks(n.div_ceil(workers)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(i, spec)| {
                            let pid = format!("{}_{:03}", spec.kind.as_str(), i);
                            (*i, run_session(world, spec, &pid, 170.0, DEFAULT_MAX_SESSION_MS).map(|r| (*spec, r)))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("cohort worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results.into_iter().map(|r| r.expect("every session ran")).collect()
}
