//! 10 Hz telemetry samples, per-participant CSV logs, input traces and replay.

use crate::building::PlacedPose;
use crate::error::{SimError, TelemetryError};
use crate::geometry::Vec3;
use crate::sim::{
    gaze_raycast, init_session_at, step, AgentState, GazeHit, InputFrame, SessionEvent, SessionState, World,
};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const LOG_HEADER: &str =
    "t_ms,x_cm,y_cm,z_cm,yaw_deg,pitch_deg,roll_deg,gaze_x_cm,gaze_y_cm,gaze_z_cm,gaze_target,assignment,event";
pub const TRACE_HEADER: &str = "tick,move_held,yaw_deg,pitch_deg,roll_deg";
pub const EVENTS_HEADER: &str = "t_ms,event,detail";
/// Samples between forced flushes of a streaming log (one second).
const FLUSH_EVERY_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySample {
    pub t_ms: u64,
    /// Eye position.
    pub pos: Vec3,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub gaze: Option<Vec3>,
    pub gaze_target: String,
    pub assignment: u8,
    /// Events at this instant, `;`-separated `event detail` labels.
    pub event: String,
}

impl TelemetrySample {
    /// Copy with every real value rounded to the printed precision.
    pub fn rounded(&self) -> Self {
        let r3 = |v: f64| (v * 1000.0).round() / 1000.0;
        let rv = |v: Vec3| Vec3::new(r3(v.x), r3(v.y), r3(v.z));
        TelemetrySample {
            pos: rv(self.pos),
            yaw_deg: r3(self.yaw_deg),
            pitch_deg: r3(self.pitch_deg),
            roll_deg: r3(self.roll_deg),
            gaze: self.gaze.map(rv),
            ..self.clone()
        }
    }

    pub fn events(&self) -> Vec<(String, String)> {
        split_events(&self.event)
    }
}

fn split_events(cell: &str) -> Vec<(String, String)> {
    cell.split(';')
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once(' ') {
            Some((e, d)) => (e.to_string(), d.to_string()),
            None => (s.to_string(), String::new()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub participant_id: String,
    pub samples: Vec<TelemetrySample>,
    pub events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn new(participant_id: &str) -> Self {
        SessionLog { participant_id: participant_id.to_string(), samples: Vec::new(), events: Vec::new() }
    }

    pub fn rounded(&self) -> Self {
        SessionLog { samples: self.samples.iter().map(TelemetrySample::rounded).collect(), ..self.clone() }
    }

    /// Label of the exit reached, if the session finished.
    pub fn exit_reached(&self) -> Option<&str> {
        self.events.iter().find(|e| e.event == "exit_reached").map(|e| e.detail.as_str())
    }
}

/// Snapshot of the current state. Call on sample ticks.
pub fn sample(agent: &AgentState, session: &SessionState, gaze: &GazeHit) -> TelemetrySample {
    let mut now: Vec<&SessionEvent> = session.events_now().collect();
    now.reverse();
    TelemetrySample {
        t_ms: session.clock_ms,
        pos: agent.pos,
        yaw_deg: agent.yaw,
        pitch_deg: agent.pitch,
        roll_deg: agent.roll,
        gaze: gaze.point,
        gaze_target: gaze.label(),
        assignment: session.assignment_id(),
        event: now.iter().map(|e| e.label()).collect::<Vec<_>>().join(";"),
    }
}

/// Recorded per-tick inputs plus what is needed to restart the session.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTrace {
    pub participant_id: String,
    pub fixture_hash: String,
    pub eye_height_cm: f64,
    pub seed: u64,
    pub start_assignment: u8,
    pub start: PlacedPose,
    pub start_yaw: f64,
    pub frames: Vec<InputFrame>,
}

impl InputTrace {
    pub fn truncated(&self, n: usize) -> Self {
        InputTrace { frames: self.frames[..n.min(self.frames.len())].to_vec(), ..self.clone() }
    }
}

/// One running session with its log and trace.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub agent: AgentState,
    pub session: SessionState,
    pub log: SessionLog,
    pub trace: InputTrace,
}

impl SessionRun {
    pub fn start(world: &World, participant_id: &str, eye_height_cm: f64, seed: u64) -> Result<Self, SimError> {
        let place = world.spec.lookup_place("4.02")?;
        Self::start_at(world, participant_id, eye_height_cm, seed, 1, place, 0.0)
    }

    pub fn start_at(
        world: &World,
        participant_id: &str,
        eye_height_cm: f64,
        seed: u64,
        assignment_id: u8,
        place: PlacedPose,
        yaw: f64,
    ) -> Result<Self, SimError> {
        let (agent, session) = init_session_at(world, eye_height_cm, seed, assignment_id, place, yaw)?;
        let mut log = SessionLog::new(participant_id);
        log.events.extend(session.event_log.iter().cloned());
        log.samples.push(sample(&agent, &session, &gaze_raycast(world, &agent)));
        let trace = InputTrace {
            participant_id: participant_id.to_string(),
            fixture_hash: world.fixture_hash().to_string(),
            eye_height_cm,
            seed,
            start_assignment: assignment_id,
            start: place,
            start_yaw: yaw,
            frames: Vec::new(),
        };
        Ok(SessionRun { agent, session, log, trace })
    }

    /// Advance one tick; returns events and the new sample if one was taken.
    pub fn step(
        &mut self,
        world: &World,
        input: &InputFrame,
    ) -> Result<(Vec<SessionEvent>, Option<TelemetrySample>), SimError> {
        input.validate()?;
        self.trace.frames.push(*input);
        let events = step(world, &mut self.agent, &mut self.session, input);
        self.log.events.extend(events.iter().cloned());
        let s = if self.session.is_sample_tick() {
            let s = sample(&self.agent, &self.session, &gaze_raycast(world, &self.agent));
            self.log.samples.push(s.clone());
            Some(s)
        } else {
            None
        };
        Ok((events, s))
    }

    pub fn finished(&self) -> bool {
        self.session.finished()
    }
}

/// Re-run a session from its input trace.
pub fn replay(world: &World, trace: &InputTrace) -> Result<SessionLog, TelemetryError> {
    if trace.fixture_hash != world.fixture_hash() {
        return Err(TelemetryError::FixtureMismatch {
            expected: world.fixture_hash().to_string(),
            found: trace.fixture_hash.clone(),
        });
    }
    let mut run = SessionRun::start_at(
        world,
        &trace.participant_id,
        trace.eye_height_cm,
        trace.seed,
        trace.start_assignment,
        trace.start,
        trace.start_yaw,
    )?;
    for f in &trace.frames {
        run.step(world, f)?;
    }
    Ok(run.log)
}

/// Participant ids become file names, so keep them to a safe alphabet.
pub fn valid_participant_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn log_file_name(id: &str) -> String {
    format!("participant_{id}.csv")
}

pub fn trace_file_name(id: &str) -> String {
    format!("participant_{id}.trace.csv")
}

pub fn events_file_name(id: &str) -> String {
    format!("participant_{id}.events.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TelemetryError + '_ {
    move |source| TelemetryError::Io { path: path.to_path_buf(), source }
}

fn f3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn sample_record(s: &TelemetrySample) -> Vec<String> {
    let (gx, gy, gz) = match s.gaze {
        Some(g) => (f3(g.x), f3(g.y), f3(g.z)),
        None => (String::new(), String::new(), String::new()),
    };
    vec![
        s.t_ms.to_string(),
        f3(s.pos.x),
        f3(s.pos.y),
        f3(s.pos.z),
        f3(s.yaw_deg),
        f3(s.pitch_deg),
        f3(s.roll_deg),
        gx,
        gy,
        gz,
        s.gaze_target.clone(),
        s.assignment.to_string(),
        s.event.clone(),
    ]
}

fn trace_record(tick: usize, f: &InputFrame) -> Vec<String> {
    vec![
        tick.to_string(),
        u8::from(f.move_held).to_string(),
        f.yaw.to_string(),
        f.pitch.to_string(),
        f.roll.to_string(),
    ]
}

fn trace_meta(t: &InputTrace) -> String {
    format!(
        "# participant={} fixture={} eye_height_cm={} seed={} start_assignment={} start_floor={} start_x={} start_y={} start_yaw={}\n",
        t.participant_id,
        t.fixture_hash,
        t.eye_height_cm,
        t.seed,
        t.start_assignment,
        t.start.floor,
        t.start.point.x,
        t.start.point.y,
        t.start_yaw
    )
}

fn create(path: &Path, overwrite: bool) -> Result<File, TelemetryError> {
    if path.exists() && !overwrite {
        return Err(TelemetryError::Exists(path.to_path_buf()));
    }
    File::create(path).map_err(io_err(path))
}

fn csv_writer(file: File, header: &str) -> Result<csv::Writer<BufWriter<File>>, TelemetryError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header.split(','))?;
    Ok(w)
}

fn flush<W: Write>(w: &mut csv::Writer<W>, path: &Path) -> Result<(), TelemetryError> {
    w.flush().map_err(io_err(path))
}

/// Write `participant_<id>.csv` into `dir`.
pub fn write_log(log: &SessionLog, dir: &Path, overwrite: bool) -> Result<PathBuf, TelemetryError> {
    let path = dir.join(log_file_name(&log.participant_id));
    let mut w = csv_writer(create(&path, overwrite)?, LOG_HEADER)?;
    for s in &log.samples {
        w.write_record(sample_record(s))?;
    }
    flush(&mut w, &path)?;
    Ok(path)
}

pub fn write_events(log: &SessionLog, dir: &Path, overwrite: bool) -> Result<PathBuf, TelemetryError> {
    let path = dir.join(events_file_name(&log.participant_id));
    let mut w = csv_writer(create(&path, overwrite)?, EVENTS_HEADER)?;
    for e in &log.events {
        w.write_record([e.t_ms.to_string(), e.event.clone(), e.detail.clone()])?;
    }
    flush(&mut w, &path)?;
    Ok(path)
}

pub fn write_trace(trace: &InputTrace, dir: &Path, overwrite: bool) -> Result<PathBuf, TelemetryError> {
    let path = dir.join(trace_file_name(&trace.participant_id));
    let mut file = create(&path, overwrite)?;
    file.write_all(trace_meta(trace).as_bytes()).map_err(io_err(&path))?;
    let mut w = csv_writer(file, TRACE_HEADER)?;
    for (i, f) in trace.frames.iter().enumerate() {
        w.write_record(trace_record(i, f))?;
    }
    flush(&mut w, &path)?;
    Ok(path)
}

/// Write the log, events and trace files of one session.
pub fn write_session(run: &SessionRun, dir: &Path, overwrite: bool) -> Result<PathBuf, TelemetryError> {
    let p = write_log(&run.log, dir, overwrite)?;
    write_events(&run.log, dir, overwrite)?;
    write_trace(&run.trace, dir, overwrite)?;
    Ok(p)
}

fn check_header(found: &csv::StringRecord, expected: &str) -> Result<(), TelemetryError> {
    let found: Vec<&str> = found.iter().collect();
    if found.join(",") != expected {
        return Err(TelemetryError::MalformedHeader(found.join(",")));
    }
    Ok(())
}

fn cell<T: std::str::FromStr>(rec: &csv::StringRecord, row: usize, idx: usize, name: &str) -> Result<T, TelemetryError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<T>().map_err(|e| TelemetryError::BadCell { row, column: name.to_string(), message: format!("{raw:?}: {e}") })
}

fn participant_from_path(path: &Path, suffix: &str) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix("participant_"))
        .and_then(|n| n.strip_suffix(suffix))
        .unwrap_or("")
        .to_string()
}

/// Parse a telemetry log. Row numbers in errors count data rows from 1.
pub fn parse_log(path: &Path) -> Result<SessionLog, TelemetryError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(BufReader::new(file));
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(TelemetryError::MalformedHeader(String::new())),
    };
    check_header(&header, LOG_HEADER)?;
    let names: Vec<&str> = LOG_HEADER.split(',').collect();
    let mut log = SessionLog::new(&participant_from_path(path, ".csv"));
    let mut last: Option<u64> = None;
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(TelemetryError::BadCell {
                row,
                column: "*".into(),
                message: format!("expected {} cells, found {}", names.len(), rec.len()),
            });
        }
        let num = |idx: usize| cell::<f64>(&rec, row, idx, names[idx]);
        let t_ms: u64 = cell(&rec, row, 0, names[0])?;
        if last.is_some_and(|l| t_ms <= l) {
            return Err(TelemetryError::NonMonotone { row });
        }
        last = Some(t_ms);
        let gaze = if rec[7].is_empty() && rec[8].is_empty() && rec[9].is_empty() {
            None
        } else {
            Some(Vec3::new(num(7)?, num(8)?, num(9)?))
        };
        let s = TelemetrySample {
            t_ms,
            pos: Vec3::new(num(1)?, num(2)?, num(3)?),
            yaw_deg: num(4)?,
            pitch_deg: num(5)?,
            roll_deg: num(6)?,
            gaze,
            gaze_target: rec[10].to_string(),
            assignment: cell(&rec, row, 11, names[11])?,
            event: rec[12].to_string(),
        };
        for (e, d) in s.events() {
            log.events.push(SessionEvent { t_ms, event: e, detail: d });
        }
        log.samples.push(s);
    }
    Ok(log)
}

pub fn parse_events(path: &Path) -> Result<Vec<SessionEvent>, TelemetryError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(BufReader::new(file));
    let mut records = r.records();
    match records.next() {
        Some(h) => check_header(&h?, EVENTS_HEADER)?,
        None => return Err(TelemetryError::MalformedHeader(String::new())),
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        out.push(SessionEvent {
            t_ms: cell(&rec, i + 1, 0, "t_ms")?,
            event: rec.get(1).unwrap_or("").to_string(),
            detail: rec.get(2).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

pub fn parse_trace(path: &Path) -> Result<InputTrace, TelemetryError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut meta = String::new();
    reader.read_line(&mut meta).map_err(io_err(path))?;
    let meta = meta
        .trim_end()
        .strip_prefix("# ")
        .ok_or_else(|| TelemetryError::MalformedHeader(meta.trim_end().to_string()))?;
    let get = |k: &str| -> Result<&str, TelemetryError> {
        meta.split(' ')
            .find_map(|kv| kv.strip_prefix(k).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| TelemetryError::MalformedHeader(format!("trace metadata lacks {k}")))
    };
    let num = |k: &str| -> Result<f64, TelemetryError> {
        get(k)?.parse().map_err(|_| TelemetryError::MalformedHeader(format!("bad {k}")))
    };
    let floor: u8 = num("start_floor")? as u8;
    let mut trace = InputTrace {
        participant_id: get("participant")?.to_string(),
        fixture_hash: get("fixture")?.to_string(),
        eye_height_cm: num("eye_height_cm")?,
        seed: get("seed")?.parse().map_err(|_| TelemetryError::MalformedHeader("bad seed".into()))?,
        start_assignment: num("start_assignment")? as u8,
        start: PlacedPose { floor, point: Vec3::new(num("start_x")?, num("start_y")?, 0.0) },
        start_yaw: num("start_yaw")?,
        frames: Vec::new(),
    };
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = r.records();
    match records.next() {
        Some(h) => check_header(&h?, TRACE_HEADER)?,
        None => return Err(TelemetryError::MalformedHeader(String::new())),
    }
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec?;
        let tick: usize = cell(&rec, row, 0, "tick")?;
        if tick != i {
            return Err(TelemetryError::NonMonotone { row });
        }
        let held: u8 = cell(&rec, row, 1, "move_held")?;
        trace.frames.push(InputFrame {
            move_held: held != 0,
            yaw: cell(&rec, row, 2, "yaw_deg")?,
            pitch: cell(&rec, row, 3, "pitch_deg")?,
            roll: cell(&rec, row, 4, "roll_deg")?,
        });
    }
    Ok(trace)
}

/// Incremental writer for live sessions. Files are written under a
/// `.partial` suffix and renamed on `finish`.
pub struct StreamingWriter {
    dir: PathBuf,
    participant_id: String,
    log: csv::Writer<BufWriter<File>>,
    events: csv::Writer<BufWriter<File>>,
    trace: csv::Writer<BufWriter<File>>,
    ticks: usize,
    unflushed: usize,
}

impl StreamingWriter {
    pub fn partial_path(dir: &Path, file_name: &str) -> PathBuf {
        dir.join(format!("{file_name}.partial"))
    }

    fn names(id: &str) -> [String; 3] {
        [log_file_name(id), events_file_name(id), trace_file_name(id)]
    }

    pub fn create(dir: &Path, trace: &InputTrace, overwrite: bool) -> Result<Self, TelemetryError> {
        let id = &trace.participant_id;
        for n in Self::names(id) {
            let p = dir.join(&n);
            if p.exists() && !overwrite {
                return Err(TelemetryError::Exists(p));
            }
        }
        let [ln, en, tn] = Self::names(id);
        let open = |n: &str| -> Result<File, TelemetryError> {
            let p = Self::partial_path(dir, n);
            OpenOptions::new().write(true).create(true).truncate(true).open(&p).map_err(io_err(&p))
        };
        let log = csv_writer(open(&ln)?, LOG_HEADER)?;
        let events = csv_writer(open(&en)?, EVENTS_HEADER)?;
        let mut tf = open(&tn)?;
        let tp = Self::partial_path(dir, &tn);
        tf.write_all(trace_meta(trace).as_bytes()).map_err(io_err(&tp))?;
        let trace_w = csv_writer(tf, TRACE_HEADER)?;
        Ok(StreamingWriter {
            dir: dir.to_path_buf(),
            participant_id: id.clone(),
            log,
            events,
            trace: trace_w,
            ticks: 0,
            unflushed: 0,
        })
    }

    pub fn push_input(&mut self, f: &InputFrame) -> Result<(), TelemetryError> {
        self.trace.write_record(trace_record(self.ticks, f))?;
        self.ticks += 1;
        Ok(())
    }

    pub fn push_events(&mut self, events: &[SessionEvent]) -> Result<(), TelemetryError> {
        for e in events {
            self.events.write_record([e.t_ms.to_string(), e.event.clone(), e.detail.clone()])?;
        }
        Ok(())
    }

    pub fn push_sample(&mut self, s: &TelemetrySample) -> Result<(), TelemetryError> {
        self.log.write_record(sample_record(s))?;
        self.unflushed += 1;
        if !s.event.is_empty() || self.unflushed >= FLUSH_EVERY_SAMPLES {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TelemetryError> {
        let p = self.dir.clone();
        flush(&mut self.log, &p)?;
        flush(&mut self.events, &p)?;
        flush(&mut self.trace, &p)?;
        self.unflushed = 0;
        Ok(())
    }

    /// Flush and move the partial files to their final names.
    pub fn finish(mut self) -> Result<PathBuf, TelemetryError> {
        self.flush()?;
        for n in Self::names(&self.participant_id) {
            let from = Self::partial_path(&self.dir, &n);
            let to = self.dir.join(&n);
            fs::rename(&from, &to).map_err(io_err(&to))?;
        }
        Ok(self.dir.join(log_file_name(&self.participant_id)))
    }
}
