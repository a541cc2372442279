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

//! Message streaming: wire schema, in-process broker, trajectory files, the
//! buffer consumer, and network endpoints.

pub mod broker;
pub mod buffer;
pub mod file;
pub mod net;
pub mod wire;

pub use broker::{Ack, Broker, BrokerConfig, BrokerError, Recv, Subscription};
pub use buffer::{buffer_consume, consume_session_with, run_buffer_node, BufferError, BufferOutcome, RecordingMeta};
pub use file::{read_trajectory, FileError, Footer, StateRecord, TrajectoryFile, TrajectoryHeader, TrajectoryWriter};
pub use wire::{
    convert_json, convert_msg, read_frame, write_frame, Body, CommandKind, Envelope, PlaybackProgress, SchemaError,
    StateMsg, Telemetry,
};

/// Topic names.
pub mod topics {
    pub use super::wire::{COMMANDS, PLAYBACK, SCENE, SPHERE, STATES, TELEMETRY};

    pub const ALL: [&str; 6] = [STATES, COMMANDS, SPHERE, TELEMETRY, SCENE, PLAYBACK];
}
