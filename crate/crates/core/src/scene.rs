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

//! Stacking workspace: a table, cubes, and a kinematic gripper model.
//!
//! Closing the gripper attaches the nearest free cube within the grasp
//! radius; the cube then follows the wrist rigidly. Opening it drops the cube
//! onto the topmost cube under its footprint, or onto the table. A cube that
//! overlaps its support by less than half slides off that cube's nearer edge
//! and settles again. Settled cubes are axis-aligned.

use std::path::Path;

use nalgebra::{Isometry3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;
use crate::session::Gripper;

const CONTACT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error("cannot evaluate while cube '{0}' is held by the gripper")]
    Eval(String),
    #[error("failed to read scene config {path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub id: String,
    /// initial centre position on the table
    pub xy: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub cube_side: f64,
    pub table_height: f64,
    pub grasp_radius: f64,
    pub place_tolerance_xy: f64,
    pub cubes: Vec<CubeSpec>,
    /// bottom-to-top stacking order
    pub target_order: Vec<String>,
    pub target_base_xy: [f64; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        let cube = |id: &str, x: f64, y: f64| CubeSpec {
            id: id.to_owned(),
            xy: [x, y],
        };
        SceneConfig {
            cube_side: 0.05,
            table_height: 0.0,
            grasp_radius: 0.04,
            place_tolerance_xy: 0.025,
            cubes: vec![
                cube("red", 0.45, -0.30),
                cube("green", 0.55, -0.20),
                cube("blue", 0.40, -0.15),
                cube("yellow", 0.60, -0.35),
            ],
            target_order: ["red", "green", "blue", "yellow"].map(String::from).to_vec(),
            target_base_xy: [0.50, 0.20],
        }
    }
}

impl SceneConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let load_err = |reason: String| SceneError::Load {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| load_err(e.to_string()))
    }

    /// Default tolerances with four cubes scattered without overlap inside
    /// `x_range` × `y_range`. The same seed always gives the same layout.
    pub fn randomized(seed: u64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut config = SceneConfig::default();
        let clearance = config.cube_side * 1.5;
        let mut placed: Vec<[f64; 2]> = Vec::new();
        for spec in config.cubes.iter_mut() {
            let xy = loop {
                let candidate = [
                    rng.gen_range(x_range.0..=x_range.1),
                    rng.gen_range(y_range.0..=y_range.1),
                ];
                let base = config.target_base_xy;
                let clear = |o: &[f64; 2]| {
                    (candidate[0] - o[0]).abs() >= clearance || (candidate[1] - o[1]).abs() >= clearance
                };
                if placed.iter().all(clear) && clear(&base) {
                    break candidate;
                }
            };
            placed.push(xy);
            spec.xy = xy;
        }
        config
    }

    fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Config(m));
        for (name, v) in [
            ("cube_side", self.cube_side),
            ("grasp_radius", self.grasp_radius),
            ("place_tolerance_xy", self.place_tolerance_xy),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (i, a) in self.cubes.iter().enumerate() {
            if self.cubes[..i].iter().any(|b| b.id == a.id) {
                return bad(format!("duplicate cube id '{}'", a.id));
            }
            for b in &self.cubes[..i] {
                if (a.xy[0] - b.xy[0]).abs() < self.cube_side && (a.xy[1] - b.xy[1]).abs() < self.cube_side {
                    return bad(format!("cubes '{}' and '{}' overlap", b.id, a.id));
                }
            }
        }
        for id in &self.target_order {
            if !self.cubes.iter().any(|c| &c.id == id) {
                return bad(format!("target order names unknown cube '{id}'"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Support {
    Table,
    Cube(String),
    Gripper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub id: String,
    pub side: f64,
    pub pose: Pose,
    pub support: Support,
}

impl Cube {
    fn bottom(&self) -> f64 {
        self.pose.position.z - self.side / 2.0
    }

    fn top(&self) -> f64 {
        self.pose.position.z + self.side / 2.0
    }
}

/// Cube pose as published for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeTelemetry {
    pub id: String,
    pub side: f64,
    pub pose: Pose,
    pub support: Support,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    config: SceneConfig,
    cubes: Vec<Cube>,
    gripper: Gripper,
    /// cube pose relative to the wrist while attached
    grasp: Option<Isometry3<f64>>,
}

/// Four cubes resting on the table at their configured positions.
pub fn spawn_scene(config: &SceneConfig) -> Result<Scene, SceneError> {
    config.validate()?;
    let z = config.table_height + config.cube_side / 2.0;
    let cubes = config
        .cubes
        .iter()
        .map(|spec| Cube {
            id: spec.id.clone(),
            side: config.cube_side,
            pose: Pose::from_position(spec.xy[0], spec.xy[1], z),
            support: Support::Table,
        })
        .collect();
    Ok(Scene {
        config: config.clone(),
        cubes,
        gripper: Gripper::Open,
        grasp: None,
    })
}

fn overlap_fraction(a: &Vector3<f64>, b: &Vector3<f64>, side: f64) -> f64 {
    let dx = (side - (a.x - b.x).abs()).max(0.0);
    let dy = (side - (a.y - b.y).abs()).max(0.0);
    dx * dy / (side * side)
}

impl Scene {
    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn cube(&self, id: &str) -> Option<&Cube> {
        self.cubes.iter().find(|c| c.id == id)
    }

    pub fn attached(&self) -> Option<&Cube> {
        self.cubes.iter().find(|c| c.support == Support::Gripper)
    }

    fn has_cube_on_top(&self, id: &str) -> bool {
        self.cubes
            .iter()
            .any(|c| matches!(&c.support, Support::Cube(below) if below == id))
    }

    /// Pure form of [`Scene::advance`].
    pub fn step(&self, wrist: &Pose, gripper: Gripper) -> Scene {
        let mut next = self.clone();
        next.advance(wrist, gripper);
        next
    }

    pub fn advance(&mut self, wrist: &Pose, gripper: Gripper) {
        match (self.gripper, gripper) {
            (Gripper::Open, Gripper::Closed) => self.grasp_nearest(wrist),
            (Gripper::Closed, Gripper::Open) => self.release(),
            _ => {}
        }
        self.gripper = gripper;
        self.track(wrist);
    }

    fn grasp_nearest(&mut self, wrist: &Pose) {
        if self.attached().is_some() {
            return;
        }
        let candidate = self
            .cubes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.support != Support::Gripper && !self.has_cube_on_top(&c.id))
            .map(|(i, c)| (i, (c.pose.position - wrist.position).norm()))
            .filter(|(_, d)| *d <= self.config.grasp_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((index, _)) = candidate {
            let cube = &mut self.cubes[index];
            self.grasp = Some(wrist.to_isometry().inverse() * cube.pose.to_isometry());
            cube.support = Support::Gripper;
        }
    }

    fn release(&mut self) {
        let Some(index) = self.cubes.iter().position(|c| c.support == Support::Gripper) else {
            return;
        };
        self.grasp = None;
        let position = self.cubes[index].pose.position;
        let side = self.config.cube_side;
        let highest = |x: f64, y: f64| {
            let here = Vector3::new(x, y, 0.0);
            self.cubes
                .iter()
                .enumerate()
                .filter(|(i, c)| *i != index && c.support != Support::Gripper)
                .map(|(_, c)| (c, overlap_fraction(&c.pose.position, &here, side)))
                .filter(|(_, overlap)| *overlap > 0.0)
                .max_by(|a, b| a.0.top().total_cmp(&b.0.top()))
        };
        let (mut x, mut y) = (position.x, position.y);
        let mut landing = None;
        for _ in 0..=self.cubes.len() {
            match highest(x, y) {
                None => {
                    landing = Some((Support::Table, self.config.table_height));
                    break;
                }
                Some((c, overlap)) if overlap >= 0.5 => {
                    landing = Some((Support::Cube(c.id.clone()), c.top()));
                    break;
                }
                Some((c, _)) => {
                    // too little overlap to rest on: slide off the nearer edge
                    let (dx, dy) = (x - c.pose.position.x, y - c.pose.position.y);
                    if dx.abs() >= dy.abs() {
                        x = c.pose.position.x + side.copysign(if dx == 0.0 { 1.0 } else { dx });
                    } else {
                        y = c.pose.position.y + side.copysign(dy);
                    }
                }
            }
        }
        let (support, surface) = landing.unwrap_or_else(|| {
            // wedged between stacks: rest on the tallest one under the drop point
            x = position.x;
            y = position.y;
            let (c, _) = highest(x, y).expect("slides only start from an overlap");
            (Support::Cube(c.id.clone()), c.top())
        });
        let cube = &mut self.cubes[index];
        cube.pose = Pose::new(
            Vector3::new(x, y, surface + side / 2.0),
            UnitQuaternion::identity(),
        );
        cube.support = support;
    }

    fn track(&mut self, wrist: &Pose) {
        let Some(grasp) = self.grasp else {
            return;
        };
        let floor = self.config.table_height + self.config.cube_side / 2.0;
        if let Some(cube) = self.cubes.iter_mut().find(|c| c.support == Support::Gripper) {
            let mut pose = Pose::from_isometry(&(wrist.to_isometry() * grasp));
            // the table stops a held cube
            pose.position.z = pose.position.z.max(floor);
            cube.pose = pose;
        }
    }

    /// Length of the longest prefix of the target order stacked correctly at
    /// the target base.
    pub fn count_stacked(&self) -> Result<usize, SceneError> {
        if let Some(held) = self.attached() {
            return Err(SceneError::Eval(held.id.clone()));
        }
        let base = self.config.target_base_xy;
        let tol = self.config.place_tolerance_xy;
        let mut count = 0;
        let mut below: Option<&str> = None;
        for id in &self.config.target_order {
            let Some(cube) = self.cube(id) else { break };
            let dx = cube.pose.position.x - base[0];
            let dy = cube.pose.position.y - base[1];
            let placed = (dx * dx + dy * dy).sqrt() <= tol;
            let supported = match (below, &cube.support) {
                (None, Support::Table) => true,
                (Some(prev), Support::Cube(on)) => prev == on,
                _ => false,
            };
            if !(placed && supported) {
                break;
            }
            count += 1;
            below = Some(id);
        }
        Ok(count)
    }

    pub fn telemetry(&self) -> Vec<CubeTelemetry> {
        self.cubes
            .iter()
            .map(|c| CubeTelemetry {
                id: c.id.clone(),
                side: c.side,
                pose: c.pose,
                support: c.support.clone(),
            })
            .collect()
    }

    /// Contact and table constraints for every settled cube.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.cubes.iter().filter(|c| c.support == Support::Gripper).count() > 1 {
            return Err("more than one cube attached".into());
        }
        for cube in &self.cubes {
            if cube.bottom() < self.config.table_height - CONTACT_EPS {
                return Err(format!("cube '{}' below the table", cube.id));
            }
            let surface = match &cube.support {
                Support::Table => self.config.table_height,
                Support::Cube(id) => match self.cube(id) {
                    Some(below) => below.top(),
                    None => return Err(format!("cube '{}' rests on unknown '{id}'", cube.id)),
                },
                Support::Gripper => continue,
            };
            if (cube.bottom() - surface).abs() >= CONTACT_EPS {
                return Err(format!("cube '{}' is not in contact with its support", cube.id));
            }
        }
        for (i, a) in self.cubes.iter().enumerate() {
            for b in &self.cubes[..i] {
                let overlap = overlap_fraction(&a.pose.position, &b.pose.position, self.config.cube_side);
                let vertical = a.bottom().max(b.bottom()) < a.top().min(b.top()) - CONTACT_EPS;
                let settled = a.support != Support::Gripper && b.support != Support::Gripper;
                if settled && overlap > CONTACT_EPS && vertical {
                    return Err(format!("cubes '{}' and '{}' interpenetrate", b.id, a.id));
                }
            }
        }
        // support chains must end at the table or the gripper
        for cube in &self.cubes {
            let mut current = cube;
            for _ in 0..=self.cubes.len() {
                match &current.support {
                    Support::Cube(id) => current = self.cube(id).expect("checked above"),
                    _ => break,
                }
            }
            if matches!(current.support, Support::Cube(_)) {
                return Err(format!("support cycle through '{}'", cube.id));
            }
        }
        Ok(())
    }

    /// Places a cube directly, bypassing the gripper; for building test
    /// scenes and previews.
    pub fn place(&mut self, id: &str, x: f64, y: f64) -> Result<(), SceneError> {
        let index = self
            .cubes
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| SceneError::Config(format!("unknown cube '{id}'")))?;
        if self.has_cube_on_top(id) || self.cubes[index].support == Support::Gripper {
            return Err(SceneError::Config(format!("cube '{id}' is not free")));
        }
        let lift = self.config.table_height + 10.0;
        self.cubes[index].pose.position = Vector3::new(x, y, lift);
        self.cubes[index].support = Support::Gripper;
        self.release();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        spawn_scene(&SceneConfig::default()).unwrap()
    }

    #[test]
    fn default_spawn() {
        let s = scene();
        assert_eq!(s.cubes().len(), 4);
        assert!(s.cubes().iter().all(|c| c.support == Support::Table));
        assert!(s.check_invariants().is_ok());
        assert_eq!(s.count_stacked().unwrap(), 0);
    }

    #[test]
    fn overlapping_config_rejected() {
        let mut config = SceneConfig::default();
        config.cubes[1].xy = config.cubes[0].xy;
        assert!(matches!(spawn_scene(&config), Err(SceneError::Config(_))));
    }

    #[test]
    fn randomized_is_seeded() {
        let a = SceneConfig::randomized(4, (0.3, 0.7), (-0.4, 0.4));
        let b = SceneConfig::randomized(4, (0.3, 0.7), (-0.4, 0.4));
        assert_eq!(a, b);
        assert!(spawn_scene(&a).is_ok());
        assert_ne!(a, SceneConfig::randomized(5, (0.3, 0.7), (-0.4, 0.4)));
    }

    #[test]
    fn close_within_radius_attaches() {
        let s = scene();
        let red = s.cube("red").unwrap().pose.position;
        let wrist = Pose::from_position(red.x + 0.02, red.y, red.z);
        let s = s.step(&wrist, Gripper::Closed);
        assert_eq!(s.attached().unwrap().id, "red");
        // rigid tracking
        let s = s.step(&Pose::from_position(red.x + 0.02, red.y, red.z + 0.2), Gripper::Closed);
        let moved = s.cube("red").unwrap().pose.position;
        assert!((moved - Vector3::new(red.x, red.y, red.z + 0.2)).norm() < 1e-12);
    }

    #[test]
    fn close_out_of_range_grasps_nothing() {
        let s = scene();
        let next = s.step(&Pose::from_position(0.0, 0.0, 0.5), Gripper::Closed);
        assert!(next.attached().is_none());
        assert_eq!(next.cubes(), s.cubes());
    }

    #[test]
    fn release_settles_on_overlapping_cube() {
        let s = scene();
        let red = s.cube("red").unwrap().pose.position;
        let green = s.cube("green").unwrap().pose.position;
        let s = s.step(&Pose::from_position(red.x, red.y, red.z), Gripper::Closed);
        // 80% overlap along x: offset by a fifth of a side
        let above = Pose::from_position(green.x + 0.01, green.y, green.z + 0.2);
        let s = s.step(&above, Gripper::Closed).step(&above, Gripper::Open);
        let red = s.cube("red").unwrap();
        assert_eq!(red.support, Support::Cube("green".into()));
        assert!((red.pose.position.z - 0.075).abs() < 1e-12);
        assert!(s.check_invariants().is_ok());
    }

    #[test]
    fn release_with_small_overlap_falls_to_table() {
        let s = scene();
        let red = s.cube("red").unwrap().pose.position;
        let green = s.cube("green").unwrap().pose.position;
        let s = s.step(&Pose::from_position(red.x, red.y, red.z), Gripper::Closed);
        let above = Pose::from_position(green.x + 0.03, green.y, green.z + 0.2);
        let s = s.step(&above, Gripper::Closed).step(&above, Gripper::Open);
        assert_eq!(s.cube("red").unwrap().support, Support::Table);
    }

    #[test]
    fn count_with_prefix_rule() {
        let mut s = scene();
        let [bx, by] = s.config().target_base_xy;
        s.place("red", bx, by).unwrap();
        s.place("green", bx + 0.005, by).unwrap();
        s.place("blue", 0.3, 0.3).unwrap();
        s.place("yellow", 0.2, 0.2).unwrap();
        assert_eq!(s.count_stacked().unwrap(), 2);
    }

    #[test]
    fn count_all_four() {
        let mut s = scene();
        let [bx, by] = s.config().target_base_xy;
        for id in ["red", "green", "blue", "yellow"] {
            s.place(id, bx, by).unwrap();
        }
        assert_eq!(s.count_stacked().unwrap(), 4);
        assert!(s.check_invariants().is_ok());
        assert!((s.cube("yellow").unwrap().pose.position.z - 0.175).abs() < 1e-12);
    }

    #[test]
    fn count_while_holding_errors() {
        let s = scene();
        let red = s.cube("red").unwrap().pose;
        let s = s.step(&red, Gripper::Closed);
        assert!(matches!(s.count_stacked(), Err(SceneError::Eval(id)) if id == "red"));
    }

    #[test]
    fn wrong_order_counts_zero() {
        let mut s = scene();
        let [bx, by] = s.config().target_base_xy;
        s.place("green", bx, by).unwrap();
        s.place("red", bx, by).unwrap();
        assert_eq!(s.count_stacked().unwrap(), 0);
    }

    #[test]
    fn supporting_cube_is_not_free() {
        let mut s = scene();
        let green = s.cube("green").unwrap().pose.position;
        s.place("red", green.x, green.y).unwrap();
        let wrist = Pose::from_position(green.x, green.y, green.z);
        let s = s.step(&wrist, Gripper::Closed);
        // red sits on green and is nearer; green is blocked
        assert_ne!(s.attached().map(|c| c.id.as_str()), Some("green"));
    }
}
