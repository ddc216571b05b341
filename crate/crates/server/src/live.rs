//! One participant connection: handshake, server-side ticking, streaming
//! persistence. Time is passed in explicitly so the state machine is testable
//! without a socket or a wall clock.

use crate::protocol::{AssignmentInfo, ClientMessage, ServerMessage};
use crate::store::{SessionRecord, SessionStatus, SessionStore};
use std::sync::Arc;
use wayfind_core::error::TelemetryError;
use wayfind_core::sim::{GoalKind, InputFrame, SessionEvent, World, TICK_MS};
use wayfind_core::telemetry::{SessionRun, StreamingWriter, TelemetrySample};

pub const DEFAULT_IDLE_TIMEOUT_MS: u64 = 120_000;
pub const DEFAULT_MAX_TICKS_PER_INPUT: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Ticks follow the caller's clock; the held input fills the gaps.
    Realtime,
    /// Each input advances `ticks` ticks (default 1).
    Lockstep,
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub clock: ClockMode,
    /// `None` disables the idle timeout.
    pub idle_timeout_ms: Option<u64>,
    pub max_ticks_per_input: u32,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            clock: ClockMode::Realtime,
            idle_timeout_ms: Some(DEFAULT_IDLE_TIMEOUT_MS),
            max_ticks_per_input: DEFAULT_MAX_TICKS_PER_INPUT,
        }
    }
}

struct Running {
    token: String,
    participant_id: String,
    file_id: String,
    run: SessionRun,
    writer: StreamingWriter,
    held: InputFrame,
    spawn_ms: u64,
    last_input_ms: u64,
}

enum Phase {
    AwaitHello,
    Running(Box<Running>),
    Closed,
}

pub struct LiveSession {
    world: Arc<World>,
    store: Arc<SessionStore>,
    config: LiveConfig,
    phase: Phase,
    record: Option<SessionRecord>,
}

fn eye(s: &TelemetrySample) -> [f64; 3] {
    [s.pos.x, s.pos.y, s.pos.z]
}

impl LiveSession {
    pub fn new(world: Arc<World>, store: Arc<SessionStore>, config: LiveConfig) -> Self {
        LiveSession { world, store, config, phase: Phase::AwaitHello, record: None }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.phase, Phase::Closed)
    }

    /// Set once the session has been persisted (finished or aborted).
    pub fn record(&self) -> Option<&SessionRecord> {
        self.record.as_ref()
    }

    pub fn run(&self) -> Option<&SessionRun> {
        match &self.phase {
            Phase::Running(r) => Some(&r.run),
            _ => None,
        }
    }

    /// Parse one NDJSON line and handle it.
    pub fn handle_line(&mut self, line: &str, now_ms: u64) -> Vec<ServerMessage> {
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle(msg, now_ms),
            Err(e) => self.violation(format!("malformed message: {e}")),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage, now_ms: u64) -> Vec<ServerMessage> {
        match (&self.phase, msg) {
            (Phase::Closed, _) => vec![ServerMessage::error("session closed")],
            (Phase::AwaitHello, ClientMessage::Hello { participant_id, eye_height_cm, seed }) => {
                self.hello(&participant_id, eye_height_cm, seed.unwrap_or(0), now_ms)
            }
            (Phase::AwaitHello, ClientMessage::Input { .. }) => self.violation("not spawned".into()),
            (Phase::Running(_), ClientMessage::Hello { .. }) => self.violation("duplicate hello".into()),
            (Phase::Running(_), ClientMessage::Input { token, move_held, yaw_deg, pitch_deg, roll_deg, ticks }) => {
                let frame = InputFrame { move_held, yaw: yaw_deg, pitch: pitch_deg, roll: roll_deg };
                self.input(&token, frame, ticks, now_ms)
            }
        }
    }

    /// Advance a realtime session to `now_ms` and apply the idle timeout.
    pub fn poll(&mut self, now_ms: u64) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        let Phase::Running(r) = &self.phase else { return out };
        if let Some(limit) = self.config.idle_timeout_ms {
            if now_ms.saturating_sub(r.last_input_ms) > limit {
                out.extend(self.abort("idle timeout"));
                return out;
            }
        }
        if self.config.clock == ClockMode::Realtime {
            out.extend(self.catch_up(now_ms));
        }
        out
    }

    /// The connection went away.
    pub fn disconnect(&mut self) -> Vec<ServerMessage> {
        if matches!(self.phase, Phase::Running(_)) {
            self.abort("disconnected")
        } else {
            self.phase = Phase::Closed;
            Vec::new()
        }
    }

    fn hello(&mut self, participant_id: &str, eye_height_cm: f64, seed: u64, now_ms: u64) -> Vec<ServerMessage> {
        let file_id = match self.store.claim(participant_id) {
            Ok(id) => id,
            Err(e) => return self.violation(e.to_string()),
        };
        let run = match SessionRun::start(&self.world, &file_id, eye_height_cm, seed) {
            Ok(r) => r,
            Err(e) => return self.violation(e.to_string()),
        };
        let mut writer = match StreamingWriter::create(self.store.dir(), &run.trace, false) {
            Ok(w) => w,
            Err(e) => return self.violation(e.to_string()),
        };
        let first = run.log.samples[0].clone();
        if let Err(e) = writer.push_events(&run.log.events).and_then(|_| writer.push_sample(&first)) {
            return self.violation(e.to_string());
        }
        let a = run.session.active().expect("fresh session has an assignment");
        let spawn = ServerMessage::Spawn {
            token: new_token(),
            pos: eye(&first),
            yaw: run.agent.yaw,
            floor: run.agent.floor,
            fixture_hash: self.world.fixture_hash().to_string(),
            assignment: AssignmentInfo { id: a.id, message: a.message.clone() },
        };
        let ServerMessage::Spawn { token, .. } = &spawn else { unreachable!() };
        let state = state_message(&run, &first);
        self.phase = Phase::Running(Box::new(Running {
            token: token.clone(),
            participant_id: participant_id.to_string(),
            file_id,
            run,
            writer,
            held: InputFrame::idle(0.0),
            spawn_ms: now_ms,
            last_input_ms: now_ms,
        }));
        vec![spawn, state]
    }

    fn input(&mut self, token: &str, frame: InputFrame, ticks: Option<u32>, now_ms: u64) -> Vec<ServerMessage> {
        let Phase::Running(r) = &mut self.phase else { unreachable!() };
        if token != r.token {
            return self.violation("bad token".into());
        }
        if let Err(e) = frame.validate() {
            return self.violation(e.to_string());
        }
        r.last_input_ms = now_ms;
        match self.config.clock {
            ClockMode::Realtime => {
                let out = self.catch_up(now_ms);
                if let Phase::Running(r) = &mut self.phase {
                    r.held = frame;
                }
                out
            }
            ClockMode::Lockstep => {
                let n = ticks.unwrap_or(1).min(self.config.max_ticks_per_input);
                r.held = frame;
                self.advance(n as u64)
            }
        }
    }

    fn catch_up(&mut self, now_ms: u64) -> Vec<ServerMessage> {
        let Phase::Running(r) = &self.phase else { return Vec::new() };
        let target = now_ms.saturating_sub(r.spawn_ms) / TICK_MS;
        let n = target.saturating_sub(r.run.session.tick());
        self.advance(n)
    }

    fn advance(&mut self, ticks: u64) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        for _ in 0..ticks {
            let Phase::Running(r) = &mut self.phase else { break };
            let held = r.held;
            let (events, sample) = match r.run.step(&self.world, &held) {
                Ok(x) => x,
                Err(e) => {
                    out.extend(self.violation(e.to_string()));
                    break;
                }
            };
            if let Err(e) = persist_tick(&mut r.writer, &held, &events, sample.as_ref()) {
                out.push(ServerMessage::error(e.to_string()));
                out.extend(self.abort("write failure"));
                break;
            }
            if let Some(s) = &sample {
                out.push(state_message(&r.run, s));
            }
            for e in &events {
                match e.event.as_str() {
                    "assignment_start" => {
                        let a = r.run.session.active().expect("started assignment is active");
                        if a.goal_kind == GoalKind::Room {
                            out.push(ServerMessage::Message { text: a.message.clone() });
                        }
                    }
                    "alarm_on" => out.push(ServerMessage::Alarm { text: e.detail.clone() }),
                    _ => {}
                }
            }
            if r.run.finished() {
                out.extend(self.finish());
                break;
            }
        }
        out
    }

    fn finish(&mut self) -> Vec<ServerMessage> {
        let Phase::Running(r) = std::mem::replace(&mut self.phase, Phase::Closed) else { return Vec::new() };
        let r = *r;
        let exit = r.run.session.exit_reached.clone();
        let files = self.store.final_paths(&r.file_id);
        let mut record = record_of(&r, SessionStatus::Finished);
        let mut out = Vec::new();
        match r.writer.finish() {
            Ok(_) => record.files = Some(files),
            Err(e) => {
                record.status = SessionStatus::Aborted;
                out.push(ServerMessage::error(e.to_string()));
            }
        }
        if let Err(e) = self.store.append_index(&record) {
            out.push(ServerMessage::error(e.to_string()));
        }
        out.push(match record.status {
            SessionStatus::Finished => ServerMessage::End { exit_label: exit, reason: None },
            _ => ServerMessage::End { exit_label: None, reason: Some("write failure".into()) },
        });
        self.record = Some(record);
        out
    }

    fn abort(&mut self, reason: &str) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        if let Phase::Running(r) = std::mem::replace(&mut self.phase, Phase::Closed) {
            let mut r = *r;
            let _ = r.writer.flush();
            let record = record_of(&r, SessionStatus::Aborted);
            if let Err(e) = self.store.append_index(&record) {
                out.push(ServerMessage::error(e.to_string()));
            }
            self.record = Some(record);
        }
        self.phase = Phase::Closed;
        out.push(ServerMessage::End { exit_label: None, reason: Some(reason.to_string()) });
        out
    }

    fn violation(&mut self, message: String) -> Vec<ServerMessage> {
        let mut out = vec![ServerMessage::Error { message }];
        out.extend(self.abort("protocol error"));
        out
    }
}

fn persist_tick(
    w: &mut StreamingWriter,
    input: &InputFrame,
    events: &[SessionEvent],
    sample: Option<&TelemetrySample>,
) -> Result<(), TelemetryError> {
    w.push_input(input)?;
    w.push_events(events)?;
    if let Some(s) = sample {
        w.push_sample(s)?;
    }
    Ok(())
}

fn record_of(r: &Running, status: SessionStatus) -> SessionRecord {
    SessionRecord {
        participant_id: r.participant_id.clone(),
        file_id: r.file_id.clone(),
        eye_height_cm: r.run.trace.eye_height_cm,
        seed: r.run.trace.seed,
        fixture_hash: r.run.trace.fixture_hash.clone(),
        status,
        files: None,
    }
}

fn state_message(run: &SessionRun, s: &TelemetrySample) -> ServerMessage {
    ServerMessage::State {
        t_ms: s.t_ms,
        pos: eye(s),
        yaw: s.yaw_deg,
        pitch: s.pitch_deg,
        floor: run.agent.floor,
        assignment: s.assignment,
    }
}

fn new_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}
