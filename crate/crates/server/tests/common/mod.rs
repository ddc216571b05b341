#![allow(dead_code)]

use std::sync::{Arc, OnceLock};
use wayfind_core::agents::{plan_route, policy_step, route_from_path, PolicyKind, PolicySpec, PolicyState};
use wayfind_core::building::{PlacedPose, EXIT_FLOOR};
use wayfind_core::geometry::Vec3;
use wayfind_core::sim::{GoalKind, InputFrame, World};
use wayfind_core::telemetry::{SessionRun, TelemetrySample};

pub fn world() -> Arc<World> {
    static W: OnceLock<Arc<World>> = OnceLock::new();
    W.get_or_init(|| Arc::new(World::ceg().expect("fixture world"))).clone()
}

/// Client that predicts the server by running the same simulation locally
/// and steering with a scripted policy.
pub struct ScriptedClient {
    pub mirror: SessionRun,
    policy: PolicySpec,
    state: Option<PolicyState>,
    planned_for: Option<usize>,
    /// Evacuate to this exit instead of the policy's choice.
    pub exit_override: Option<String>,
}

impl ScriptedClient {
    pub fn new(world: &World, kind: PolicyKind, eye_height_cm: f64, seed: u64) -> Self {
        ScriptedClient {
            mirror: SessionRun::start(world, "mirror", eye_height_cm, seed).expect("mirror start"),
            policy: PolicySpec::noiseless(kind),
            state: None,
            planned_for: None,
            exit_override: None,
        }
    }

    pub fn finished(&self) -> bool {
        self.mirror.finished()
    }

    pub fn next_input(&mut self, world: &World) -> InputFrame {
        let run = &self.mirror;
        if self.planned_for != Some(run.session.assignment_index) {
            let a = run.session.active().expect("unfinished").clone();
            let start = PlacedPose { floor: run.agent.floor, point: Vec3::with_xy(run.agent.xy(), run.agent.feet_z()) };
            let route = match (&self.exit_override, a.goal_kind) {
                (Some(label), GoalKind::AnyExit) => {
                    let e = world.spec.exit(label).expect("exit exists");
                    let goal = PlacedPose { floor: EXIT_FLOOR, point: Vec3::with_xy(e.position, world.floor_z(EXIT_FLOOR)) };
                    let path = world.mesh.shortest_path(&start, &goal).expect("exit reachable");
                    route_from_path(world, &self.policy, a.id, &start, &path, Some(label.clone()))
                }
                _ => plan_route(world, &self.policy, &a, &start).expect("route"),
            };
            self.state = Some(PolicyState::new(self.policy, route));
            self.planned_for = Some(run.session.assignment_index);
        }
        policy_step(world, self.state.as_mut().expect("planned"), &run.agent)
    }

    pub fn apply(&mut self, world: &World, input: &InputFrame) -> Option<TelemetrySample> {
        self.mirror.step(world, input).expect("valid input").1
    }
}
