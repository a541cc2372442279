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

//! Trajectory files: JSON Lines with a header line, one line per recorded
//! state, and a footer line written on finalization.
//!
//! ```text
//! {"session_id":"kt-0001","robot":"arm_7dof","dof":7,"joint_names":[...],"rate_hz":20}
//! {"seq":0,"timestamp_ms":1000,"q":[...],"gripper":"open"}
//! ...
//! {"count":100,"finalized":true}
//! ```

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Gripper, RobotState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub session_id: String,
    pub robot: String,
    pub dof: usize,
    pub joint_names: Vec<String>,
    pub rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub q: Vec<f64>,
    pub gripper: Gripper,
}

impl StateRecord {
    pub fn to_state(&self) -> RobotState {
        RobotState {
            timestamp_ms: self.timestamp_ms,
            q: self.q.clone(),
            gripper: self.gripper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub count: u64,
    pub finalized: bool,
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt trajectory file: {0}")]
    Corrupt(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

/// Parsed contents of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: TrajectoryHeader,
    pub records: Vec<StateRecord>,
    pub finalized: bool,
}

impl TrajectoryFile {
    /// Span between first and last record.
    pub fn duration_s(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.timestamp_ms - a.timestamp_ms) as f64 / 1000.0,
            _ => 0.0,
        }
    }
}

/// Streams records to `sink`; the header goes out immediately, the footer
/// only on [`TrajectoryWriter::finalize`].
pub struct TrajectoryWriter<W: Write> {
    sink: W,
    header: TrajectoryHeader,
    count: u64,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut sink: W, header: TrajectoryHeader) -> Result<Self, FileError> {
        serde_json::to_writer(&mut sink, &header).map_err(io::Error::other)?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(TrajectoryWriter {
            sink,
            header,
            count: 0,
        })
    }

    pub fn header(&self) -> &TrajectoryHeader {
        &self.header
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Records must arrive with seq equal to the number already written.
    pub fn append(&mut self, record: &StateRecord) -> Result<(), FileError> {
        if record.seq != self.count {
            return Err(FileError::Corrupt(format!(
                "expected seq {}, got {}",
                self.count, record.seq
            )));
        }
        if record.q.len() != self.header.dof {
            return Err(FileError::Schema(format!(
                "record has {} joints, header declares {}",
                record.q.len(),
                self.header.dof
            )));
        }
        serde_json::to_writer(&mut self.sink, record).map_err(io::Error::other)?;
        self.sink.write_all(b"\n")?;
        self.sink.flush()?;
        self.count += 1;
        Ok(())
    }

    pub fn finalize(mut self) -> Result<W, FileError> {
        let footer = Footer {
            count: self.count,
            finalized: true,
        };
        serde_json::to_writer(&mut self.sink, &footer).map_err(io::Error::other)?;
        self.sink.write_all(b"\n")?;
        self.sink.flush()?;
        Ok(self.sink)
    }

    /// Gives the sink back without a footer, leaving the file unfinalized.
    pub fn abandon(self) -> W {
        self.sink
    }
}

/// Parses a trajectory file.
///
/// Without `salvage`, a missing footer or an unparsable line is an error. With
/// it, the footer may be absent and a torn final line is dropped; a footer
/// that is present must still match the body.
pub fn read_trajectory<R: BufRead>(reader: R, salvage: bool) -> Result<TrajectoryFile, FileError> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| FileError::Corrupt("empty file".into()))??;
    let header: TrajectoryHeader = serde_json::from_str(&header_line)
        .map_err(|e| FileError::Corrupt(format!("bad header: {e}")))?;
    if header.joint_names.len() != header.dof {
        return Err(FileError::Corrupt(format!(
            "header lists {} joint names for dof {}",
            header.joint_names.len(),
            header.dof
        )));
    }

    let all: Vec<String> = lines.collect::<Result<_, _>>()?;
    let mut records = Vec::new();
    let mut footer = None;
    for (index, line) in all.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let last = index + 1 == all.len();
        if footer.is_some() {
            return Err(FileError::Corrupt("data after footer".into()));
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) if salvage && last => break,
            Err(e) => return Err(FileError::Corrupt(format!("line {}: {e}", index + 2))),
        };
        if value.get("count").is_some() {
            let parsed: Footer = serde_json::from_value(value)
                .map_err(|e| FileError::Corrupt(format!("bad footer: {e}")))?;
            footer = Some(parsed);
            continue;
        }
        let record: StateRecord = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(_) if salvage && last => break,
            Err(e) => return Err(FileError::Corrupt(format!("line {}: {e}", index + 2))),
        };
        if record.q.len() != header.dof {
            return Err(FileError::Schema(format!(
                "record {} has {} joints, header declares {}",
                record.seq,
                record.q.len(),
                header.dof
            )));
        }
        if record.seq != records.len() as u64 {
            return Err(FileError::Corrupt(format!(
                "seq gap: expected {}, found {}",
                records.len(),
                record.seq
            )));
        }
        if let Some(prev) = records.last().map(|r: &StateRecord| r.timestamp_ms) {
            if record.timestamp_ms <= prev {
                return Err(FileError::Corrupt(format!(
                    "timestamps not increasing at seq {}",
                    record.seq
                )));
            }
        }
        records.push(record);
    }

    let finalized = match footer {
        Some(f) if f.count != records.len() as u64 => {
            return Err(FileError::Corrupt(format!(
                "footer count {} but {} records",
                f.count,
                records.len()
            )))
        }
        Some(f) => f.finalized,
        None => false,
    };
    if !finalized && !salvage {
        return Err(FileError::Corrupt(
            "file is not finalized (no footer); load with salvage to recover".into(),
        ));
    }
    Ok(TrajectoryFile {
        header,
        records,
        finalized,
    })
}
