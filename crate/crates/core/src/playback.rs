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

//! Replay of recorded trajectories against a simulated joint controller.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{forward_kinematics, link_frames, KinematicChain};
use crate::scene::Scene;
use crate::session::{Gripper, RobotState, Trajectory};
use crate::streaming::topics::PLAYBACK;
use crate::streaming::{read_trajectory, Broker, Envelope, FileError, PlaybackProgress, Telemetry, TrajectoryHeader};

/// Default joint speed bound for [`TrackingMode::RateLimited`], rad/s.
pub const DEFAULT_MAX_VELOCITY: f64 = 1.5;

/// Command handed to the low-level controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCommand {
    pub timestamp_ms: u64,
    pub q: Vec<f64>,
    pub gripper: Gripper,
}

impl From<&RobotState> for JointCommand {
    fn from(s: &RobotState) -> Self {
        JointCommand {
            timestamp_ms: s.timestamp_ms,
            q: s.q.clone(),
            gripper: s.gripper,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlaybackError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt trajectory file: {0}")]
    Corrupt(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

impl From<FileError> for PlaybackError {
    fn from(e: FileError) -> Self {
        match e {
            FileError::Io(source) => PlaybackError::Io {
                path: String::new(),
                source,
            },
            FileError::Corrupt(m) => PlaybackError::Corrupt(m),
            FileError::Schema(m) => PlaybackError::Schema(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrackingMode {
    #[default]
    Instant,
    RateLimited { max_velocity: f64 },
}

impl TrackingMode {
    pub fn rate_limited() -> Self {
        TrackingMode::RateLimited {
            max_velocity: DEFAULT_MAX_VELOCITY,
        }
    }
}

/// Simulated low-level joint controller.
#[derive(Debug, Clone)]
pub struct SimController {
    chain: Arc<KinematicChain>,
    q_actual: Vec<f64>,
    gripper_actual: Gripper,
    mode: TrackingMode,
}

impl SimController {
    /// `q_initial` is clamped into the joint limits.
    pub fn new(chain: Arc<KinematicChain>, mut q_initial: Vec<f64>, mode: TrackingMode) -> Result<Self, PlaybackError> {
        if q_initial.len() != chain.dof() {
            return Err(PlaybackError::Schema(format!(
                "initial q has {} values, chain has {} joints",
                q_initial.len(),
                chain.dof()
            )));
        }
        chain.clamp(&mut q_initial);
        Ok(SimController {
            chain,
            q_actual: q_initial,
            gripper_actual: Gripper::Open,
            mode,
        })
    }

    pub fn chain(&self) -> &Arc<KinematicChain> {
        &self.chain
    }

    pub fn q_actual(&self) -> &[f64] {
        &self.q_actual
    }

    pub fn gripper_actual(&self) -> Gripper {
        self.gripper_actual
    }

    pub fn mode(&self) -> TrackingMode {
        self.mode
    }

    /// Applies one command over `dt_s` seconds. Returns a fault description
    /// if the command could not be reached.
    pub fn command(&mut self, cmd: &JointCommand, dt_s: f64) -> Option<String> {
        let mut target = cmd.q.clone();
        self.chain.clamp(&mut target);
        let mut fault = (target != cmd.q).then(|| "command outside joint limits; clamped".to_owned());
        match self.mode {
            TrackingMode::Instant => self.q_actual = target,
            TrackingMode::RateLimited { max_velocity } => {
                let max_step = max_velocity * dt_s.max(0.0);
                let mut worst: Option<(usize, f64)> = None;
                for (i, (actual, goal)) in self.q_actual.iter_mut().zip(&target).enumerate() {
                    let delta = goal - *actual;
                    if delta.abs() > max_step {
                        *actual += max_step.copysign(delta);
                        let needed = delta.abs() / dt_s.max(f64::MIN_POSITIVE);
                        if worst.is_none_or(|(_, v)| needed > v) {
                            worst = Some((i, needed));
                        }
                    } else {
                        *actual = *goal;
                    }
                }
                if let Some((joint, needed)) = worst {
                    fault = Some(format!(
                        "joint {joint} needs {needed:.3} rad/s, limit is {max_velocity} rad/s"
                    ));
                }
            }
        }
        self.gripper_actual = cmd.gripper;
        fault
    }
}

/// Trajectory plus the file metadata it came from.
#[derive(Debug, Clone)]
pub struct LoadedTrajectory {
    pub header: TrajectoryHeader,
    pub trajectory: Trajectory,
    pub finalized: bool,
}

/// Reads a trajectory file. With `chain`, the recorded joint count must
/// match it.
pub fn load_trajectory(
    path: impl AsRef<Path>,
    chain: Option<&KinematicChain>,
    salvage: bool,
) -> Result<LoadedTrajectory, PlaybackError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PlaybackError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parsed = read_trajectory(BufReader::new(file), salvage)?;
    if let Some(chain) = chain {
        if parsed.header.dof != chain.dof() {
            return Err(PlaybackError::Schema(format!(
                "file records {} joints, robot '{}' has {}",
                parsed.header.dof,
                chain.robot_name(),
                chain.dof()
            )));
        }
    }
    if !parsed.finalized {
        warn!("{} is not finalized; loaded {} salvaged states", path.display(), parsed.records.len());
    }
    let states = parsed.records.iter().map(|r| r.to_state()).collect();
    let trajectory = Trajectory::new(parsed.header.session_id.clone(), states)
        .map_err(|e| PlaybackError::Corrupt(e.to_string()))?;
    Ok(LoadedTrajectory {
        header: parsed.header,
        trajectory,
        finalized: parsed.finalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaybackClock {
    /// Timestamps advance without sleeping.
    #[default]
    Virtual,
    /// Commands are issued at their recorded offsets in wall time.
    Realtime,
}

#[derive(Debug, Clone, Default)]
pub struct PlaybackOptions {
    pub clock: PlaybackClock,
    /// Progress and scene telemetry go here when set.
    pub telemetry: Option<Broker>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaybackStep {
    pub index: usize,
    pub timestamp_ms: u64,
    pub commanded: Vec<f64>,
    pub actual: Vec<f64>,
    pub gripper: Gripper,
    /// Largest absolute joint difference between commanded and actual.
    pub tracking_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PlaybackReport {
    pub session_id: String,
    pub steps: Vec<PlaybackStep>,
    /// Span from the first to the last issued command: measured in wall time
    /// for [`PlaybackClock::Realtime`], from the timestamps otherwise.
    pub duration_s: f64,
    pub final_scene: Option<Scene>,
}

impl PlaybackReport {
    pub fn faults(&self) -> impl Iterator<Item = &PlaybackStep> {
        self.steps.iter().filter(|s| s.fault.is_some())
    }

    pub fn max_tracking_error(&self) -> f64 {
        self.steps.iter().map(|s| s.tracking_error).fold(0.0, f64::max)
    }
}

/// Forwards each recorded state to `controller` with the recorded spacing.
/// A scene, when given, is stepped with the controller's wrist pose after
/// every command.
pub fn play(
    traj: &Trajectory,
    controller: &mut SimController,
    mut scene: Option<&mut Scene>,
    options: &PlaybackOptions,
) -> Result<PlaybackReport, PlaybackError> {
    let chain = controller.chain().clone();
    if traj.dof() != chain.dof() {
        return Err(PlaybackError::Schema(format!(
            "trajectory has {} joints, controller chain has {}",
            traj.dof(),
            chain.dof()
        )));
    }
    let total = traj.states.len();
    let mut steps = Vec::with_capacity(total);
    let started = Instant::now();
    let mut first_issued: Option<Instant> = None;
    let mut last_issued = started;
    let mut previous_ms = traj.t_start_ms;

    for (index, state) in traj.states.iter().enumerate() {
        if options.clock == PlaybackClock::Realtime {
            let due = started + Duration::from_millis(state.timestamp_ms - traj.t_start_ms);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        let cmd = JointCommand::from(state);
        let dt_s = (state.timestamp_ms - previous_ms) as f64 / 1000.0;
        previous_ms = state.timestamp_ms;
        let fault = controller.command(&cmd, dt_s);
        let now = Instant::now();
        first_issued.get_or_insert(now);
        last_issued = now;

        let actual = controller.q_actual().to_vec();
        if let Some(scene) = scene.as_deref_mut() {
            let wrist = forward_kinematics(&chain, &actual).expect("dof checked");
            scene.advance(&wrist, controller.gripper_actual());
        }
        let tracking_error = cmd
            .q
            .iter()
            .zip(&actual)
            .map(|(c, a)| (c - a).abs())
            .fold(0.0, f64::max);
        if let Some(broker) = &options.telemetry {
            publish_progress(broker, traj, index, &actual, controller.gripper_actual(), scene.as_deref(), &chain);
        }
        steps.push(PlaybackStep {
            index,
            timestamp_ms: state.timestamp_ms,
            commanded: cmd.q,
            actual,
            gripper: controller.gripper_actual(),
            tracking_error,
            fault,
        });
    }

    let duration_s = match options.clock {
        PlaybackClock::Virtual => traj.duration_ms() as f64 / 1000.0,
        PlaybackClock::Realtime => (last_issued - first_issued.unwrap_or(last_issued)).as_secs_f64(),
    };
    Ok(PlaybackReport {
        session_id: traj.session_id.clone(),
        steps,
        duration_s,
        final_scene: scene.map(|s| s.clone()),
    })
}

fn publish_progress(
    broker: &Broker,
    traj: &Trajectory,
    index: usize,
    q: &[f64],
    gripper: Gripper,
    scene: Option<&Scene>,
    chain: &KinematicChain,
) {
    let total = traj.states.len();
    let frames = link_frames(chain, q)
        .ok()
        .map(|f| f.iter().map(|p| [p.position.x, p.position.y, p.position.z]).collect());
    let telemetry = Telemetry {
        gripper: Some(gripper),
        q: Some(q.to_vec()),
        frames,
        cubes: scene.map(|s| s.telemetry()),
        playback: Some(PlaybackProgress {
            index,
            total,
            done: index + 1 == total,
        }),
        ..Telemetry::default()
    };
    let msg = Envelope::telemetry(PLAYBACK, &traj.session_id, traj.states[index].timestamp_ms, telemetry);
    if let Err(e) = broker.publish(PLAYBACK, msg) {
        warn!("playback progress not published: {e}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixture;

    fn straight_line(chain: &KinematicChain, n: usize, step_ms: u64, span: f64) -> Trajectory {
        let states = (0..n)
            .map(|i| RobotState {
                timestamp_ms: 1000 + i as u64 * step_ms,
                q: vec![span * i as f64 / n as f64; chain.dof()],
                gripper: if i < n / 2 { Gripper::Open } else { Gripper::Closed },
            })
            .collect();
        Trajectory::new("t", states).unwrap()
    }

    #[test]
    fn instant_replay_is_exact() {
        let chain = Arc::new(Fixture::Planar2Link.chain());
        let traj = straight_line(&chain, 50, 50, 1.0);
        let mut c = SimController::new(chain, vec![0.0, 0.0], TrackingMode::Instant).unwrap();
        let report = play(&traj, &mut c, None, &PlaybackOptions::default()).unwrap();
        for (step, state) in report.steps.iter().zip(&traj.states) {
            assert_eq!(step.actual, state.q);
            assert_eq!(step.tracking_error, 0.0);
            assert_eq!(step.gripper, state.gripper);
        }
        assert!((report.duration_s - 2.45).abs() < 1e-12);
    }

    #[test]
    fn rate_limited_reports_faults_and_continues() {
        let chain = Arc::new(Fixture::Planar2Link.chain());
        // 3 rad over 10 steps of 50 ms needs 6 rad/s
        let traj = straight_line(&chain, 10, 50, 3.0);
        let mut c = SimController::new(chain, vec![0.0, 0.0], TrackingMode::rate_limited()).unwrap();
        let report = play(&traj, &mut c, None, &PlaybackOptions::default()).unwrap();
        assert_eq!(report.steps.len(), 10);
        assert!(report.faults().count() > 0);
        for pair in report.steps.windows(2) {
            for (a, b) in pair[0].actual.iter().zip(&pair[1].actual) {
                assert!((b - a).abs() <= DEFAULT_MAX_VELOCITY * 0.05 + 1e-12);
            }
        }
    }

    #[test]
    fn dof_mismatch_is_schema_error() {
        let chain = Arc::new(Fixture::Arm6Dof.chain());
        let traj = straight_line(&Fixture::Planar2Link.chain(), 5, 50, 0.1);
        let mut c = SimController::new(chain.clone(), chain.neutral(), TrackingMode::Instant).unwrap();
        assert!(matches!(
            play(&traj, &mut c, None, &PlaybackOptions::default()),
            Err(PlaybackError::Schema(_))
        ));
    }

    #[test]
    fn progress_published() {
        let chain = Arc::new(Fixture::Planar2Link.chain());
        let traj = straight_line(&chain, 5, 50, 0.1);
        let broker = Broker::new();
        let mut sub = broker.subscribe(PLAYBACK, 0).unwrap();
        let mut c = SimController::new(chain, vec![0.0, 0.0], TrackingMode::Instant).unwrap();
        let options = PlaybackOptions {
            clock: PlaybackClock::Virtual,
            telemetry: Some(broker.clone()),
        };
        play(&traj, &mut c, None, &options).unwrap();
        let mut last = None;
        while let Some(m) = sub.try_recv() {
            last = Some(m);
        }
        let last = last.unwrap();
        assert_eq!(last.seq, 4);
        match &last.body {
            crate::streaming::Body::Telemetry(t) => assert!(t.playback.unwrap().done),
            other => panic!("{other:?}"),
        }
    }
}
