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

//! Session driver: schedules IK and record ticks, applies teacher input,
//! and streams states and telemetry through the broker.
//!
//! Both clocks share one schedule. IK tick `k` falls at `k·1000/ik_hz` ms and
//! record tick `k` at `k·1000/record_hz` ms. When several things fall on
//! the same millisecond, teacher input is applied first, then the IK tick,
//! then the record tick.

pub mod script;

use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{link_frames, Pose};
use crate::scene::Scene;
use crate::session::{CommAct, SessionState, Trajectory, VoiceCommand, VoiceCommandKind};
use crate::streaming::topics::{COMMANDS, SCENE, SPHERE, STATES, TELEMETRY};
use crate::streaming::{Broker, CommandKind, Envelope, Telemetry};

pub use script::{
    load_script, parse_script, perfect_stacking_script, perturb_script, write_script, ScriptAction, ScriptError,
    ScriptEvent, StackingPlan,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid rates: need ik_hz >= record_hz >= 1, got ik_hz={ik_hz} record_hz={record_hz}")]
pub struct RateError {
    pub ik_hz: u32,
    pub record_hz: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rates {
    pub ik_hz: u32,
    pub record_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            ik_hz: 30,
            record_hz: 20,
        }
    }
}

impl Rates {
    pub fn new(ik_hz: u32, record_hz: u32) -> Result<Self, RateError> {
        let rates = Rates { ik_hz, record_hz };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if self.record_hz >= 1 && self.ik_hz >= self.record_hz {
            Ok(())
        } else {
            Err(RateError {
                ik_hz: self.ik_hz,
                record_hz: self.record_hz,
            })
        }
    }

    pub fn ik_time(&self, k: u64) -> u64 {
        k * 1000 / self.ik_hz as u64
    }

    pub fn record_time(&self, k: u64) -> u64 {
        k * 1000 / self.record_hz as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub ik_ticks: u64,
    pub record_ticks: u64,
    pub states_published: u64,
    /// rejected commands and IK input errors, in order
    pub errors: Vec<String>,
    /// virtual or scheduled end of the run, ms
    pub end_ms: u64,
}

/// One finished demonstration.
#[derive(Debug, Clone)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    pub act: CommAct,
}

pub struct Engine {
    session: SessionState,
    broker: Broker,
    rates: Rates,
    preview: Option<Scene>,
    echo_inputs: bool,
    pending_target: Option<Pose>,
    next_ik: u64,
    next_record: u64,
    stats: RunStats,
    finished: Vec<Demonstration>,
}

impl Engine {
    pub fn new(session: SessionState, broker: Broker, rates: Rates) -> Result<Self, RateError> {
        rates.validate()?;
        Ok(Engine {
            session,
            broker,
            rates,
            preview: None,
            echo_inputs: true,
            pending_target: None,
            next_ik: 0,
            next_record: 0,
            stats: RunStats::default(),
            finished: Vec::new(),
        })
    }

    /// Scene moved along with the live arm, published on `kt.scene`.
    pub fn with_preview_scene(mut self, scene: Scene) -> Self {
        self.preview = Some(scene);
        self
    }

    /// Whether applied inputs are republished on `kt.sphere` and
    /// `kt.commands`. On for scripts, off when inputs come from those topics.
    pub fn echo_inputs(mut self, echo: bool) -> Self {
        self.echo_inputs = echo;
        self
    }

    pub fn session(&self) -> &SessionState {
        &self.session
    }

    pub fn broker(&self) -> &Broker {
        &self.broker
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn preview_scene(&self) -> Option<&Scene> {
        self.preview.as_ref()
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Demonstrations completed so far, oldest first.
    pub fn take_demonstrations(&mut self) -> Vec<Demonstration> {
        std::mem::take(&mut self.finished)
    }

    fn publish(&mut self, topic: &str, msg: Envelope) {
        if let Err(e) = self.broker.publish(topic, msg) {
            warn!("publish to {topic} failed: {e}");
            self.stats.errors.push(format!("publish to {topic}: {e}"));
        }
    }

    fn session_label(&self) -> String {
        self.session.active_session().unwrap_or_default().to_owned()
    }

    /// Applies one piece of teacher input at `t_ms`.
    pub fn apply(&mut self, t_ms: u64, action: &ScriptAction) {
        match action {
            ScriptAction::Sphere { pose } => {
                if !pose.is_finite() {
                    self.stats.errors.push(format!("t={t_ms}: sphere pose is not finite"));
                    return;
                }
                self.session_target(*pose);
                if self.echo_inputs {
                    let msg = Envelope::sphere(&self.session_label(), t_ms, *pose);
                    self.publish(SPHERE, msg);
                }
            }
            ScriptAction::Command { kind } => self.voice(t_ms, *kind),
        }
    }

    fn session_target(&mut self, pose: Pose) {
        self.pending_target = Some(pose);
    }

    fn voice(&mut self, t_ms: u64, kind: VoiceCommandKind) {
        let before = self.session_label();
        if let Err(e) = self.session.handle_voice(VoiceCommand::new(kind, t_ms)) {
            self.stats.errors.push(format!("t={t_ms}: {e}"));
            let telemetry = Telemetry {
                mode: Some(self.session.mode()),
                error: Some(e.to_string()),
                ..Telemetry::default()
            };
            self.publish(TELEMETRY, Envelope::telemetry(TELEMETRY, &before, t_ms, telemetry));
            return;
        }
        let label = if kind == VoiceCommandKind::Stop { before } else { self.session_label() };
        if self.echo_inputs {
            self.publish(COMMANDS, Envelope::command(COMMANDS, &label, t_ms, kind.into()));
        }
        if kind == VoiceCommandKind::Stop {
            // end-of-session marker for consumers of the state stream
            self.publish(STATES, Envelope::command(STATES, &label, t_ms, CommandKind::Stop));
            match self.session.finalize() {
                Ok((trajectory, act)) => {
                    info!(
                        "session {} finished: {} states over {} ms",
                        trajectory.session_id,
                        trajectory.states.len(),
                        trajectory.duration_ms()
                    );
                    self.finished.push(Demonstration { trajectory, act });
                }
                Err(e) => {
                    warn!("session {label} produced no trajectory: {e}");
                    self.stats.errors.push(format!("t={t_ms}: {e}"));
                }
            }
        }
    }

    fn ik_tick(&mut self) {
        let result = match self.pending_target.take() {
            Some(pose) => self.session.tick_ik(pose),
            None => self.session.tick_ik_hold(),
        };
        if let Err(e) = result {
            self.stats.errors.push(e.to_string());
        }
        if let Some(scene) = self.preview.as_mut() {
            scene.advance(&self.session.tip_pose(), self.session.gripper());
        }
        self.stats.ik_ticks += 1;
        self.next_ik += 1;
    }

    fn record_tick(&mut self, t_ms: u64) {
        if let Some(msg) = self.session.tick_record(t_ms) {
            self.publish(STATES, msg);
            self.stats.states_published += 1;
        }
        let label = self.session_label();
        let q = self.session.q_current().to_vec();
        let frames = link_frames(self.session.chain(), &q)
            .ok()
            .map(|f| f.iter().map(|p| [p.position.x, p.position.y, p.position.z]).collect());
        let telemetry = Telemetry {
            mode: Some(self.session.mode()),
            gripper: Some(self.session.gripper()),
            q: Some(q),
            frames,
            target: self.session.target_pose().copied(),
            ..Telemetry::default()
        };
        self.publish(TELEMETRY, Envelope::telemetry(TELEMETRY, &label, t_ms, telemetry));
        if let Some(scene) = &self.preview {
            let telemetry = Telemetry {
                cubes: Some(scene.telemetry()),
                ..Telemetry::default()
            };
            self.publish(SCENE, Envelope::telemetry(SCENE, &label, t_ms, telemetry));
        }
        self.stats.record_ticks += 1;
        self.next_record += 1;
    }

    /// Runs every tick due strictly before `until_ms`, interleaved with the
    /// script events in that window.
    fn advance_to<'a>(&mut self, until_ms: u64, events: &mut std::iter::Peekable<impl Iterator<Item = &'a ScriptEvent>>) {
        loop {
            let t_ik = self.rates.ik_time(self.next_ik);
            let t_rec = self.rates.record_time(self.next_record);
            let t_event = events.peek().map_or(u64::MAX, |e| e.t_ms);
            let t = t_ik.min(t_rec).min(t_event);
            if t >= until_ms {
                break;
            }
            if t_event == t {
                let event = events.next().expect("peeked");
                self.apply(event.t_ms, &event.action);
            } else if t_ik == t {
                self.ik_tick();
            } else {
                self.record_tick(t);
            }
        }
        self.stats.end_ms = until_ms;
    }

    /// Runs `script` on the virtual clock up to `end_ms`, exclusive
    /// (default: just past the last event).
    pub fn run_virtual(&mut self, script: &[ScriptEvent], end_ms: Option<u64>) -> &RunStats {
        let end = end_ms.unwrap_or_else(|| script.last().map_or(0, |e| e.t_ms + 1));
        let mut events = script.iter().peekable();
        self.advance_to(end, &mut events);
        &self.stats
    }

    /// Wall-clock run of `duration_ms`. Ticks fire at absolute deadlines
    /// measured from the call; `input` is polled before each tick for
    /// teacher input due by then.
    pub fn run_realtime<F>(&mut self, duration_ms: u64, mut input: F) -> &RunStats
    where
        F: FnMut(&mut Engine, u64) -> bool,
    {
        let origin = Instant::now();
        let base = self.stats.end_ms;
        loop {
            let t_ik = self.rates.ik_time(self.next_ik);
            let t_rec = self.rates.record_time(self.next_record);
            let t = t_ik.min(t_rec);
            if t >= base + duration_ms {
                break;
            }
            let due = origin + Duration::from_millis(t - base);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
            if !input(self, t) {
                break;
            }
            let mut none = std::iter::empty::<&ScriptEvent>().peekable();
            self.advance_to(t + 1, &mut none);
        }
        self.stats.end_ms = base + duration_ms;
        &self.stats
    }

    /// Real-time run of a script: events fire when the clock reaches them.
    pub fn run_script_realtime(&mut self, script: &[ScriptEvent], end_ms: Option<u64>) -> &RunStats {
        let end = end_ms.unwrap_or_else(|| script.last().map_or(0, |e| e.t_ms + 1));
        let mut cursor = 0;
        self.run_realtime(end, |engine, now| {
            while let Some(event) = script.get(cursor).filter(|e| e.t_ms <= now) {
                engine.apply(event.t_ms, &event.action);
                cursor += 1;
            }
            true
        })
    }
}
