//! Output directory, file-name allocation and the `sessions.csv` index.

use crate::error::ServerError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use wayfind_core::telemetry::{
    events_file_name, log_file_name, trace_file_name, valid_participant_id, SessionRun, StreamingWriter,
};

pub const INDEX_FILE: &str = "sessions.csv";
pub const INDEX_HEADER: [&str; 9] =
    ["participant_id", "file_id", "eye_height_cm", "seed", "fixture_hash", "status", "log", "trace", "events"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Finished,
    Aborted,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Running => "running",
            SessionStatus::Finished => "finished",
            SessionStatus::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub participant_id: String,
    /// Id used in file names; differs from `participant_id` after a collision.
    pub file_id: String,
    pub eye_height_cm: f64,
    pub seed: u64,
    pub fixture_hash: String,
    pub status: SessionStatus,
    /// Final log, trace and events paths. Only set once the files are renamed.
    pub files: Option<[PathBuf; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub participant_id: String,
    pub file_id: String,
    pub status: String,
    pub log: String,
    pub trace: String,
    pub events: String,
}

/// Shared by all sessions of one server; the index has a single writer at a time.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    claimed: Mutex<BTreeSet<String>>,
    index: Mutex<()>,
}

impl SessionStore {
    pub fn open(dir: &Path) -> Result<Self, ServerError> {
        fs::create_dir_all(dir).map_err(|e| ServerError::io(dir, e))?;
        Ok(SessionStore { dir: dir.to_path_buf(), claimed: Mutex::new(BTreeSet::new()), index: Mutex::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn in_use(&self, id: &str) -> bool {
        [log_file_name(id), trace_file_name(id), events_file_name(id)].iter().any(|n| {
            self.dir.join(n).exists() || StreamingWriter::partial_path(&self.dir, n).exists()
        })
    }

    /// Reserve a file id for `participant_id`: the id itself, else `<id>_2`, `<id>_3`, ...
    pub fn claim(&self, participant_id: &str) -> Result<String, ServerError> {
        if !valid_participant_id(participant_id) {
            return Err(ServerError::InvalidParticipant(participant_id.to_string()));
        }
        let mut claimed = self.claimed.lock().expect("claim lock");
        for k in 1.. {
            let id = if k == 1 { participant_id.to_string() } else { format!("{participant_id}_{k}") };
            if !valid_participant_id(&id) {
                return Err(ServerError::InvalidParticipant(participant_id.to_string()));
            }
            if !claimed.contains(&id) && !self.in_use(&id) {
                claimed.insert(id.clone());
                return Ok(id);
            }
        }
        unreachable!("unbounded id search")
    }

    pub fn final_paths(&self, file_id: &str) -> [PathBuf; 3] {
        [
            self.dir.join(log_file_name(file_id)),
            self.dir.join(trace_file_name(file_id)),
            self.dir.join(events_file_name(file_id)),
        ]
    }

    /// Append one row; the header is written when the index is new.
    pub fn append_index(&self, record: &SessionRecord) -> Result<(), ServerError> {
        let _guard = self.index.lock().expect("index lock");
        let path = self.dir.join(INDEX_FILE);
        let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        if fresh {
            w.write_record(INDEX_HEADER)?;
        }
        let files: Vec<String> = match &record.files {
            Some(f) => f.iter().map(|p| p.display().to_string()).collect(),
            None => vec![String::new(); 3],
        };
        w.write_record([
            record.participant_id.as_str(),
            record.file_id.as_str(),
            &record.eye_height_cm.to_string(),
            &record.seed.to_string(),
            record.fixture_hash.as_str(),
            record.status.as_str(),
            &files[0],
            &files[1],
            &files[2],
        ])?;
        let bytes = w.into_inner().map_err(|e| ServerError::io(&path, e.into_error()))?;
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ServerError::io(&path, e))?;
        f.write_all(&bytes).and_then(|_| f.sync_data()).map_err(|e| ServerError::io(&path, e))
    }

    /// Write a completed in-memory run through the partial-then-rename path and index it.
    pub fn persist_run(&self, participant_id: &str, run: &SessionRun) -> Result<SessionRecord, ServerError> {
        let file_id = self.claim(participant_id)?;
        let mut trace = run.trace.clone();
        trace.participant_id = file_id.clone();
        trace.frames.clear();
        let mut w = StreamingWriter::create(&self.dir, &trace, false)?;
        for f in &run.trace.frames {
            w.push_input(f)?;
        }
        w.push_events(&run.log.events)?;
        for s in &run.log.samples {
            w.push_sample(s)?;
        }
        w.finish()?;
        let status = if run.finished() { SessionStatus::Finished } else { SessionStatus::Aborted };
        let record = SessionRecord {
            participant_id: participant_id.to_string(),
            file_id: file_id.clone(),
            eye_height_cm: run.trace.eye_height_cm,
            seed: run.trace.seed,
            fixture_hash: run.trace.fixture_hash.clone(),
            status,
            files: Some(self.final_paths(&file_id)),
        };
        self.append_index(&record)?;
        Ok(record)
    }
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexRow>, ServerError> {
    let path = dir.join(INDEX_FILE);
    let mut r = csv::Reader::from_path(&path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").to_string();
        rows.push(IndexRow {
            participant_id: get(0),
            file_id: get(1),
            status: get(5),
            log: get(6),
            trace: get(7),
            events: get(8),
        });
    }
    Ok(rows)
}
