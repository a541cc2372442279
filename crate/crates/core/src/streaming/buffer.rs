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

//! Buffer consumer: persists one streamed session to a trajectory file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use thiserror::Error;

use super::broker::{Broker, BrokerError, Subscription};
use super::file::{FileError, StateRecord, TrajectoryHeader, TrajectoryWriter};
use super::wire::{convert_msg, Body, SchemaError};
use crate::kinematics::KinematicChain;

#[derive(Debug, Error)]
pub enum BufferError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl From<io::Error> for BufferError {
    fn from(e: io::Error) -> Self {
        BufferError::File(FileError::Io(e))
    }
}

/// Robot description written into every file header.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub robot: String,
    pub joint_names: Vec<String>,
    pub rate_hz: u32,
}

impl RecordingMeta {
    pub fn from_chain(chain: &KinematicChain, rate_hz: u32) -> Self {
        RecordingMeta {
            robot: chain.robot_name().to_owned(),
            joint_names: chain.joint_names(),
            rate_hz,
        }
    }

    fn header(&self, session_id: &str) -> TrajectoryHeader {
        TrajectoryHeader {
            session_id: session_id.to_owned(),
            robot: self.robot.clone(),
            dof: self.joint_names.len(),
            joint_names: self.joint_names.clone(),
            rate_hz: self.rate_hz,
        }
    }
}

#[derive(Debug)]
pub struct BufferOutcome<W> {
    /// `None` when the stream ended before any state arrived.
    pub header: Option<TrajectoryHeader>,
    pub count: u64,
    pub finalized: bool,
    pub sink: Option<W>,
}

/// Consumes the next session from `sub`, opening the sink once its first
/// state arrives. Messages of other sessions are skipped. The file is
/// finalized when the session's stop marker arrives; if the stream ends
/// first, the file is left without footer.
pub fn consume_session_with<W, F>(
    sub: &mut Subscription,
    meta: &RecordingMeta,
    open: F,
) -> Result<BufferOutcome<W>, BufferError>
where
    W: Write,
    F: FnOnce(&TrajectoryHeader) -> io::Result<W>,
{
    let mut open = Some(open);
    let mut writer: Option<TrajectoryWriter<W>> = None;
    let dof = meta.joint_names.len();

    while let Some(msg) = sub.recv() {
        match (&msg.body, writer.as_mut()) {
            (Body::State { .. }, None) => {
                if msg.seq != 0 {
                    warn!(
                        "buffer joined session '{}' mid-stream at seq {}; waiting for a new session",
                        msg.session_id, msg.seq
                    );
                    continue;
                }
                let header = meta.header(&msg.session_id);
                let sink = (open.take().expect("sink opened once"))(&header)?;
                let mut w = TrajectoryWriter::new(sink, header)?;
                w.append(&record_of(&msg, dof)?)?;
                writer = Some(w);
            }
            (Body::State { .. }, Some(w)) if msg.session_id == w.header().session_id => {
                w.append(&record_of(&msg, dof)?)?;
            }
            (Body::Command { .. }, Some(w))
                if msg.is_stop_marker() && msg.session_id == w.header().session_id =>
            {
                let w = writer.take().expect("matched Some");
                let header = w.header().clone();
                let count = w.count();
                let sink = w.finalize()?;
                info!("finalized session '{}' with {count} states", header.session_id);
                return Ok(BufferOutcome {
                    header: Some(header),
                    count,
                    finalized: true,
                    sink: Some(sink),
                });
            }
            _ => {}
        }
    }

    match writer {
        Some(w) => {
            warn!(
                "stream ended before session '{}' stopped; file left unfinalized",
                w.header().session_id
            );
            Ok(BufferOutcome {
                header: Some(w.header().clone()),
                count: w.count(),
                finalized: false,
                sink: Some(w.abandon()),
            })
        }
        None => Ok(BufferOutcome {
            header: None,
            count: 0,
            finalized: false,
            sink: None,
        }),
    }
}

fn record_of(msg: &super::wire::Envelope, dof: usize) -> Result<StateRecord, BufferError> {
    let cmd = convert_msg(msg, dof)?;
    Ok(StateRecord {
        seq: msg.seq,
        timestamp_ms: cmd.timestamp_ms,
        q: cmd.q,
        gripper: cmd.gripper,
    })
}

/// Subscribes to `topic` from offset 0 and writes its first session to `sink`.
pub fn buffer_consume<W: Write>(
    broker: &Broker,
    topic: &str,
    meta: &RecordingMeta,
    sink: W,
) -> Result<BufferOutcome<W>, BufferError> {
    let mut sub = broker.subscribe(topic, 0)?;
    consume_session_with(&mut sub, meta, move |_| Ok(sink))
}

/// Writes every session on `sub` to `<dir>/<session_id>.jsonl` until the
/// stream ends. Returns the paths written, finalized or not.
pub fn run_buffer_node(
    mut sub: Subscription,
    dir: &Path,
    meta: &RecordingMeta,
) -> Result<Vec<(PathBuf, bool)>, BufferError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    loop {
        let mut path = None;
        let outcome = consume_session_with(&mut sub, meta, |header| {
            let p = dir.join(format!("{}.jsonl", header.session_id));
            let file = File::create(&p)?;
            path = Some(p);
            Ok(BufWriter::new(file))
        })?;
        match (outcome.header, path) {
            (Some(_), Some(p)) => written.push((p, outcome.finalized)),
            _ => return Ok(written),
        }
        if !outcome.finalized {
            return Ok(written);
        }
    }
}
