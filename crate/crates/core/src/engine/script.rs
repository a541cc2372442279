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

//! Teaching scripts: timestamped sphere poses and voice commands that stand
//! in for a human teacher.
//!
//! One JSON object per line:
//!
//! ```text
//! {"t_ms":0,"type":"command","kind":"start"}
//! {"t_ms":50,"type":"sphere","pose":{"position":[0.4,0.0,0.3],"orientation":[0,1,0,0]}}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;
use crate::scene::SceneConfig;
use crate::session::VoiceCommandKind;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("script line {line}: t_ms {t_ms} goes back in time")]
    Order { line: usize, t_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ScriptAction {
    Sphere { pose: Pose },
    Command { kind: VoiceCommandKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

impl ScriptEvent {
    pub fn sphere(t_ms: u64, pose: Pose) -> Self {
        ScriptEvent {
            t_ms,
            action: ScriptAction::Sphere { pose },
        }
    }

    pub fn command(t_ms: u64, kind: VoiceCommandKind) -> Self {
        ScriptEvent {
            t_ms,
            action: ScriptAction::Command { kind },
        }
    }
}

pub fn parse_script<R: BufRead>(reader: R) -> Result<Vec<ScriptEvent>, ScriptError> {
    let mut events: Vec<ScriptEvent> = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| ScriptError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event: ScriptEvent = serde_json::from_str(&line).map_err(|e| ScriptError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if events.last().is_some_and(|prev| prev.t_ms > event.t_ms) {
            return Err(ScriptError::Order {
                line: line_no,
                t_ms: event.t_ms,
            });
        }
        events.push(event);
    }
    Ok(events)
}

pub fn load_script(path: impl AsRef<Path>) -> Result<Vec<ScriptEvent>, ScriptError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_script(BufReader::new(file))
}

pub fn write_script<W: Write>(mut writer: W, events: &[ScriptEvent]) -> std::io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut writer, event).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Timing and geometry of a generated stacking demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct StackingPlan {
    /// wrist height for transfers, above the table
    pub transfer_height: f64,
    /// extra height above the exact resting pose when releasing
    pub release_clearance: f64,
    /// sphere speed along straight segments, m/s
    pub speed: f64,
    /// spacing of sphere updates
    pub step_ms: u64,
    /// pause before and after each gripper command
    pub dwell_ms: u64,
    pub lead_in_ms: u64,
    /// wrist orientation during manipulation
    pub orientation: UnitQuaternion<f64>,
}

impl Default for StackingPlan {
    fn default() -> Self {
        StackingPlan {
            transfer_height: 0.25,
            release_clearance: 0.002,
            speed: 0.25,
            step_ms: 50,
            dwell_ms: 600,
            lead_in_ms: 1500,
            orientation: UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.0),
        }
    }
}

struct Builder<'a> {
    plan: &'a StackingPlan,
    events: Vec<ScriptEvent>,
    t_ms: u64,
    pose: Pose,
}

impl Builder<'_> {
    /// Straight-line sphere motion, slerping orientation, over `duration_ms`
    /// (or at plan speed when `None`).
    fn move_to(&mut self, to: Pose, duration_ms: Option<u64>) {
        let from = self.pose;
        let step = self.plan.step_ms;
        let duration = duration_ms.unwrap_or_else(|| {
            let dist = (to.position - from.position).norm();
            (dist / self.plan.speed * 1000.0).ceil() as u64
        });
        let steps = duration.div_ceil(step).max(1);
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            let position = from.position.lerp(&to.position, s);
            let orientation = from.orientation.slerp(&to.orientation, s);
            self.t_ms += step;
            self.events.push(ScriptEvent::sphere(self.t_ms, Pose::new(position, orientation)));
        }
        self.pose = to;
    }

    fn dwell(&mut self) {
        self.t_ms += self.plan.dwell_ms;
    }

    fn command(&mut self, kind: VoiceCommandKind) {
        self.dwell();
        self.events.push(ScriptEvent::command(self.t_ms, kind));
        self.dwell();
    }
}

/// Demonstration that stacks every cube of `scene` in target order.
///
/// Waypoints are cube centres (grasp) and stacked resting centres (release);
/// the wrist approaches and leaves each vertically from the transfer height.
/// Recording starts at t = 0 and stops after the last release.
pub fn perfect_stacking_script(start: &Pose, scene: &SceneConfig, plan: &StackingPlan) -> Vec<ScriptEvent> {
    let mut b = Builder {
        plan,
        events: vec![
            ScriptEvent::command(0, VoiceCommandKind::Start),
            ScriptEvent::sphere(0, *start),
        ],
        t_ms: 0,
        pose: *start,
    };
    let side = scene.cube_side;
    let table = scene.table_height;
    let at = |x: f64, y: f64, z: f64| Pose::new(Vector3::new(x, y, z), plan.orientation);
    let transfer = table + plan.transfer_height;
    let [bx, by] = scene.target_base_xy;

    for (level, id) in scene.target_order.iter().enumerate() {
        let Some(cube) = scene.cubes.iter().find(|c| &c.id == id) else {
            continue;
        };
        let [cx, cy] = cube.xy;
        let above_cube = at(cx, cy, transfer);
        if level == 0 {
            b.move_to(above_cube, Some(plan.lead_in_ms));
        } else {
            b.move_to(above_cube, None);
        }
        b.move_to(at(cx, cy, table + side / 2.0), None);
        b.command(VoiceCommandKind::Close);
        b.move_to(above_cube, None);
        b.move_to(at(bx, by, transfer), None);
        let rest = table + side / 2.0 + level as f64 * side + plan.release_clearance;
        b.move_to(at(bx, by, rest), None);
        b.command(VoiceCommandKind::Open);
        b.move_to(at(bx, by, transfer), None);
    }
    b.dwell();
    b.events.push(ScriptEvent::command(b.t_ms, VoiceCommandKind::Stop));
    b.events
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma_m` to every
/// sphere position. The underlying draws depend only on `seed`, so scripts
/// perturbed with different sigmas share the same noise direction.
pub fn perturb_script(events: &[ScriptEvent], sigma_m: f64, seed: u64) -> Vec<ScriptEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events
        .iter()
        .map(|event| match &event.action {
            ScriptAction::Sphere { pose } => {
                let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
                let noise = Vector3::new(draw(), draw(), draw()) * sigma_m;
                ScriptEvent::sphere(event.t_ms, pose.with_position(pose.position + noise))
            }
            ScriptAction::Command { .. } => event.clone(),
        })
        .collect()
}
