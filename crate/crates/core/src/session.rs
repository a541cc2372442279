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

//! A kinesthetic-teaching session as a state machine.
//!
//! The session is a communicative act with two media: the gesture (the user
//! drags the interaction sphere and the arm tracks it through IK) and the
//! voice (start/stop/open/close). The information conveyed is the robot state
//! sequence recorded between start and stop.
//!
//! The session itself is clock-free: callers feed it timestamps. The engine
//! in [`crate::engine`] owns the 30 Hz IK and 20 Hz record cadences.

use std::collections::BTreeSet;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ik::{servo_step, IkError, IkParams};
use crate::kinematics::{forward_kinematics, KinematicChain, Pose};
use crate::streaming::{Envelope, StateMsg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    #[default]
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Idle,
    Recording,
}

/// Joint configuration and gripper at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// milliseconds since session start
    pub timestamp_ms: u64,
    pub q: Vec<f64>,
    pub gripper: Gripper,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("trajectory has no states")]
    Empty,
    #[error("timestamps must strictly increase (index {0})")]
    NonIncreasing(usize),
    #[error("state {index} has {actual} joints, expected {expected}")]
    Dof {
        index: usize,
        expected: usize,
        actual: usize,
    },
}

/// Ordered robot states bounded by the start and stop of a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub session_id: String,
    pub states: Vec<RobotState>,
    pub t_start_ms: u64,
    pub t_end_ms: u64,
}

impl Trajectory {
    pub fn new(session_id: impl Into<String>, states: Vec<RobotState>) -> Result<Self, TrajectoryError> {
        let first = states.first().ok_or(TrajectoryError::Empty)?;
        let dof = first.q.len();
        for (index, pair) in states.windows(2).enumerate() {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(TrajectoryError::NonIncreasing(index + 1));
            }
        }
        if let Some((index, s)) = states.iter().enumerate().find(|(_, s)| s.q.len() != dof) {
            return Err(TrajectoryError::Dof {
                index,
                expected: dof,
                actual: s.q.len(),
            });
        }
        let t_start_ms = first.timestamp_ms;
        let t_end_ms = states.last().expect("nonempty").timestamp_ms;
        Ok(Trajectory {
            session_id: session_id.into(),
            states,
            t_start_ms,
            t_end_ms,
        })
    }

    pub fn dof(&self) -> usize {
        self.states[0].q.len()
    }

    pub fn duration_ms(&self) -> u64 {
        self.t_end_ms - self.t_start_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoiceCommandKind {
    Start,
    Stop,
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceCommand {
    pub kind: VoiceCommandKind,
    pub timestamp_ms: u64,
}

impl VoiceCommand {
    pub fn new(kind: VoiceCommandKind, timestamp_ms: u64) -> Self {
        VoiceCommand { kind, timestamp_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Gesture,
    Voice,
}

/// The part of an act carried by one medium, over its own sub-interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub medium: Medium,
    pub start_ms: u64,
    pub end_ms: u64,
}

/// A finalized gesture + voice teaching act.
///
/// `interval` runs from the start command to the stop command. The gesture
/// component spans the recorded states, which fall inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommAct {
    pub media: BTreeSet<Medium>,
    /// session id of the conveyed trajectory
    pub info: String,
    pub interval: (u64, u64),
    pub components: Vec<Component>,
    /// voice commands issued during the act, in order
    pub events: Vec<VoiceCommand>,
}

impl CommAct {
    pub fn component(&self, medium: Medium) -> Option<&Component> {
        self.components.iter().find(|c| c.medium == medium)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("'{command:?}' rejected while {mode:?}")]
    State { mode: Mode, command: VoiceCommandKind },
    #[error("no stopped recording to finalize")]
    NotStopped,
    #[error("recording '{0}' contains no states")]
    EmptyTrajectory(String),
    #[error(transparent)]
    Ik(#[from] IkError),
}

#[derive(Debug, Clone)]
struct Recording {
    session_id: String,
    start_ms: u64,
    stop_ms: Option<u64>,
    states: Vec<RobotState>,
    events: Vec<VoiceCommand>,
}

/// Mutable state of a teaching session. Single writer.
#[derive(Debug, Clone)]
pub struct SessionState {
    chain: Arc<KinematicChain>,
    params: IkParams,
    id_prefix: String,
    started: u64,
    mode: Mode,
    q_current: Vec<f64>,
    gripper: Gripper,
    target: Option<Pose>,
    recording: Option<Recording>,
    stopped: Vec<Recording>,
    event_log: Vec<VoiceCommand>,
}

impl SessionState {
    pub fn new(chain: Arc<KinematicChain>, params: IkParams, q_initial: Vec<f64>) -> Result<Self, SessionError> {
        params.validate()?;
        if q_initial.len() != chain.dof() {
            return Err(IkError::from(crate::kinematics::DimensionError {
                expected: chain.dof(),
                actual: q_initial.len(),
            })
            .into());
        }
        let mut q = q_initial;
        chain.clamp(&mut q);
        Ok(SessionState {
            chain,
            params,
            id_prefix: "kt".into(),
            started: 0,
            mode: Mode::Idle,
            q_current: q,
            gripper: Gripper::Open,
            target: None,
            recording: None,
            stopped: Vec::new(),
            event_log: Vec::new(),
        })
    }

    /// Session ids are `<prefix>-<n>` with n counting from 1.
    pub fn with_id_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.id_prefix = prefix.into();
        self
    }

    pub fn chain(&self) -> &Arc<KinematicChain> {
        &self.chain
    }

    pub fn params(&self) -> &IkParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn q_current(&self) -> &[f64] {
        &self.q_current
    }

    pub fn gripper(&self) -> Gripper {
        self.gripper
    }

    /// Latest interaction-sphere pose, if any arrived.
    pub fn target_pose(&self) -> Option<&Pose> {
        self.target.as_ref()
    }

    pub fn tip_pose(&self) -> Pose {
        forward_kinematics(&self.chain, &self.q_current).expect("q_current matches chain")
    }

    pub fn event_log(&self) -> &[VoiceCommand] {
        &self.event_log
    }

    /// Session id of the recording in progress.
    pub fn active_session(&self) -> Option<&str> {
        self.recording.as_ref().map(|r| r.session_id.as_str())
    }

    /// States recorded so far in the active recording.
    pub fn partial_states(&self) -> &[RobotState] {
        self.recording.as_ref().map_or(&[], |r| &r.states)
    }

    pub fn handle_voice(&mut self, cmd: VoiceCommand) -> Result<(), SessionError> {
        match (self.mode, cmd.kind) {
            (Mode::Idle, VoiceCommandKind::Start) => {
                self.started += 1;
                self.recording = Some(Recording {
                    session_id: format!("{}-{:04}", self.id_prefix, self.started),
                    start_ms: cmd.timestamp_ms,
                    stop_ms: None,
                    states: Vec::new(),
                    events: vec![cmd],
                });
                self.mode = Mode::Recording;
            }
            (Mode::Recording, VoiceCommandKind::Stop) => {
                let mut rec = self.recording.take().expect("recording while in Recording mode");
                rec.stop_ms = Some(cmd.timestamp_ms);
                rec.events.push(cmd);
                self.stopped.push(rec);
                self.mode = Mode::Idle;
            }
            (_, VoiceCommandKind::Open) | (_, VoiceCommandKind::Close) => {
                self.gripper = if cmd.kind == VoiceCommandKind::Open {
                    Gripper::Open
                } else {
                    Gripper::Closed
                };
                if let Some(rec) = self.recording.as_mut() {
                    rec.events.push(cmd);
                }
            }
            (mode, command) => {
                warn!("voice command {command:?} rejected while {mode:?}");
                return Err(SessionError::State { mode, command });
            }
        }
        self.event_log.push(cmd);
        Ok(())
    }

    /// Updates the sphere target and advances the arm by one servo update.
    /// Runs whether or not a recording is active.
    pub fn tick_ik(&mut self, sphere_pose: Pose) -> Result<(), SessionError> {
        if !sphere_pose.is_finite() {
            return Err(IkError::Input("sphere pose is not finite".into()).into());
        }
        self.target = Some(sphere_pose);
        self.q_current = servo_step(&self.chain, &sphere_pose, &self.q_current, &self.params)?;
        Ok(())
    }

    /// Servo toward the last known sphere pose; no-op before the first one.
    pub fn tick_ik_hold(&mut self) -> Result<(), SessionError> {
        match self.target {
            Some(pose) => self.tick_ik(pose),
            None => Ok(()),
        }
    }

    /// Snapshots the current state into the recording. Returns the message
    /// to stream, or `None` when idle or when `now_ms` does not advance.
    pub fn tick_record(&mut self, now_ms: u64) -> Option<StateMsg> {
        let rec = self.recording.as_mut()?;
        if rec.states.last().is_some_and(|s| s.timestamp_ms >= now_ms) {
            return None;
        }
        let state = RobotState {
            timestamp_ms: now_ms,
            q: self.q_current.clone(),
            gripper: self.gripper,
        };
        let mut msg = Envelope::state(&rec.session_id, now_ms, state.q.clone(), state.gripper);
        msg.seq = rec.states.len() as u64;
        rec.states.push(state);
        Some(msg)
    }

    /// Takes the oldest stopped recording as a trajectory plus its act.
    pub fn finalize(&mut self) -> Result<(Trajectory, CommAct), SessionError> {
        if self.stopped.is_empty() {
            return Err(SessionError::NotStopped);
        }
        let rec = self.stopped.remove(0);
        let stop_ms = rec.stop_ms.expect("stopped recording has a stop time");
        let trajectory = Trajectory::new(rec.session_id.clone(), rec.states)
            .map_err(|_| SessionError::EmptyTrajectory(rec.session_id.clone()))?;
        let act = CommAct {
            media: [Medium::Gesture, Medium::Voice].into_iter().collect(),
            info: trajectory.session_id.clone(),
            interval: (rec.start_ms, stop_ms),
            components: vec![
                Component {
                    medium: Medium::Gesture,
                    start_ms: trajectory.t_start_ms,
                    end_ms: trajectory.t_end_ms,
                },
                Component {
                    medium: Medium::Voice,
                    start_ms: rec.start_ms,
                    end_ms: stop_ms,
                },
            ],
            events: rec.events,
        };
        Ok((trajectory, act))
    }

    /// Whether a stopped recording is waiting for [`SessionState::finalize`].
    pub fn has_stopped_recording(&self) -> bool {
        !self.stopped.is_empty()
    }
}
