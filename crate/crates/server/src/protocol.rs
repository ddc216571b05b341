//! Newline-delimited JSON wire messages.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        participant_id: String,
        eye_height_cm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Input {
        token: String,
        move_held: bool,
        yaw_deg: f64,
        pitch_deg: f64,
        #[serde(default)]
        roll_deg: f64,
        /// Ticks to advance in lockstep mode (ignored in realtime mode).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ticks: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInfo {
    pub id: u8,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Spawn {
        token: String,
        /// Eye position in cm.
        pos: [f64; 3],
        yaw: f64,
        floor: u8,
        fixture_hash: String,
        assignment: AssignmentInfo,
    },
    State {
        t_ms: u64,
        pos: [f64; 3],
        yaw: f64,
        pitch: f64,
        floor: u8,
        assignment: u8,
    },
    Message {
        text: String,
    },
    Alarm {
        text: String,
    },
    End {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exit_label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { message: message.into() }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("message serializes");
        s.push('\n');
        s
    }
}

impl ClientMessage {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("message serializes");
        s.push('\n');
        s
    }
}
