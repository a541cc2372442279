/*
  Copyright 2026 The kt-core Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

//! Message schema shared by every topic, and its length-prefixed framing.
//!
//! A frame is a 4-byte big-endian length followed by a UTF-8 JSON object.
//! All objects carry `type`, `topic`, `session_id`, `seq` and `timestamp_ms`;
//! the remaining fields depend on `type`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;
use crate::playback::JointCommand;
use crate::scene::CubeTelemetry;
use crate::session::{Gripper, Mode, VoiceCommandKind};

pub const STATES: &str = "kt.states";
pub const COMMANDS: &str = "kt.commands";
pub const SPHERE: &str = "kt.sphere";
pub const TELEMETRY: &str = "kt.telemetry";
pub const SCENE: &str = "kt.scene";
pub const PLAYBACK: &str = "kt.playback";

/// Upper bound on a single frame body.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Start,
    Stop,
    Open,
    Close,
    /// Manually triggered playback of a recorded file.
    Replay,
}

impl From<VoiceCommandKind> for CommandKind {
    fn from(kind: VoiceCommandKind) -> Self {
        match kind {
            VoiceCommandKind::Start => CommandKind::Start,
            VoiceCommandKind::Stop => CommandKind::Stop,
            VoiceCommandKind::Open => CommandKind::Open,
            VoiceCommandKind::Close => CommandKind::Close,
        }
    }
}

impl CommandKind {
    pub fn voice(self) -> Option<VoiceCommandKind> {
        match self {
            CommandKind::Start => Some(VoiceCommandKind::Start),
            CommandKind::Stop => Some(VoiceCommandKind::Stop),
            CommandKind::Open => Some(VoiceCommandKind::Open),
            CommandKind::Close => Some(VoiceCommandKind::Close),
            CommandKind::Replay => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaybackProgress {
    pub index: usize,
    pub total: usize,
    pub done: bool,
}

/// Snapshot published for observers. Absent fields are omitted on the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<Gripper>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Link frame origins from base to tip, for skeleton rendering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubes: Option<Vec<CubeTelemetry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playback: Option<PlaybackProgress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Body {
    State {
        q: Vec<f64>,
        gripper: Gripper,
    },
    Command {
        kind: CommandKind,
        /// Trajectory file for `replay`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<String>,
    },
    Sphere {
        pose: Pose,
    },
    Telemetry(Telemetry),
}

/// One message on any topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: String,
    #[serde(default)]
    pub session_id: String,
    /// Assigned by the broker on publish: per (topic, session), from 0.
    #[serde(default)]
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: Body,
}

/// A robot-state message as streamed from the teaching engine.
pub type StateMsg = Envelope;

impl Envelope {
    pub fn new(topic: &str, session_id: &str, timestamp_ms: u64, body: Body) -> Self {
        Envelope {
            topic: topic.to_owned(),
            session_id: session_id.to_owned(),
            seq: 0,
            timestamp_ms,
            body,
        }
    }

    pub fn state(session_id: &str, timestamp_ms: u64, q: Vec<f64>, gripper: Gripper) -> Self {
        Envelope::new(STATES, session_id, timestamp_ms, Body::State { q, gripper })
    }

    pub fn command(topic: &str, session_id: &str, timestamp_ms: u64, kind: CommandKind) -> Self {
        Envelope::new(topic, session_id, timestamp_ms, Body::Command { kind, file: None })
    }

    pub fn sphere(session_id: &str, timestamp_ms: u64, pose: Pose) -> Self {
        Envelope::new(SPHERE, session_id, timestamp_ms, Body::Sphere { pose })
    }

    pub fn telemetry(topic: &str, session_id: &str, timestamp_ms: u64, telemetry: Telemetry) -> Self {
        Envelope::new(topic, session_id, timestamp_ms, Body::Telemetry(telemetry))
    }

    pub fn type_name(&self) -> &'static str {
        match self.body {
            Body::State { .. } => "state",
            Body::Command { .. } => "command",
            Body::Sphere { .. } => "sphere",
            Body::Telemetry(_) => "telemetry",
        }
    }

    pub fn is_stop_marker(&self) -> bool {
        matches!(
            self.body,
            Body::Command {
                kind: CommandKind::Stop,
                ..
            }
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SchemaError> {
        serde_json::from_slice(bytes).map_err(|e| SchemaError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected a state message, got '{0}'")]
    NotAState(&'static str),
    #[error("q has {actual} values but the recording declares {expected} joints")]
    DofMismatch { expected: usize, actual: usize },
    #[error("non-finite joint value at index {0}")]
    NonFinite(usize),
}

/// Maps a wire state message onto the controller command type.
///
/// Fields outside the state schema are ignored.
pub fn convert_msg(wire: &StateMsg, expected_dof: usize) -> Result<JointCommand, SchemaError> {
    let Body::State { q, gripper } = &wire.body else {
        return Err(SchemaError::NotAState(wire.type_name()));
    };
    if q.len() != expected_dof {
        return Err(SchemaError::DofMismatch {
            expected: expected_dof,
            actual: q.len(),
        });
    }
    if let Some(index) = q.iter().position(|v| !v.is_finite()) {
        return Err(SchemaError::NonFinite(index));
    }
    Ok(JointCommand {
        timestamp_ms: wire.timestamp_ms,
        q: q.clone(),
        gripper: *gripper,
    })
}

/// Parses raw JSON and converts it in one go.
pub fn convert_json(bytes: &[u8], expected_dof: usize) -> Result<JointCommand, SchemaError> {
    convert_msg(&Envelope::from_json(bytes)?, expected_dof)
}

pub fn write_frame<W: Write, T: Serialize>(writer: &mut W, value: &T) -> io::Result<()> {
    let body = serde_json::to_vec(value).map_err(io::Error::other)?;
    if body.len() > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    writer.write_all(&(body.len() as u32).to_be_bytes())?;
    writer.write_all(&body)?;
    writer.flush()
}

/// Reads one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    Ok(Some(body))
}
