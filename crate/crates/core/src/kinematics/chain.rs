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

use nalgebra::Isometry3;
use thiserror::Error;

use super::urdf::{JointLimits, JointSpec, RobotModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("link '{0}' does not exist in the model")]
    UnknownLink(String),
    #[error("no path from '{base}' to '{tip}': tip is not a descendant of base")]
    NotDescendant { base: String, tip: String },
}

/// Serial joint path from `base_link` to `tip_link`.
///
/// Fixed joints stay in the list; they contribute constant transforms.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    robot_name: String,
    base_link: String,
    tip_link: String,
    joints: Vec<JointSpec>,
    origins: Vec<Isometry3<f64>>,
    dof: usize,
}

impl KinematicChain {
    /// Builds a chain from an ordered joint list. Consecutive joints must be
    /// parent/child linked.
    pub fn new(
        robot_name: impl Into<String>,
        base_link: impl Into<String>,
        tip_link: impl Into<String>,
        joints: Vec<JointSpec>,
    ) -> Result<Self, ChainError> {
        let base_link = base_link.into();
        let tip_link = tip_link.into();
        let mut expected_parent = base_link.as_str();
        for joint in &joints {
            if joint.parent_link != expected_parent {
                return Err(ChainError::NotDescendant {
                    base: base_link.clone(),
                    tip: tip_link.clone(),
                });
            }
            expected_parent = joint.child_link.as_str();
        }
        if expected_parent != tip_link {
            return Err(ChainError::NotDescendant {
                base: base_link,
                tip: tip_link,
            });
        }
        let origins = joints.iter().map(JointSpec::origin_transform).collect();
        let dof = joints.iter().filter(|j| j.kind.is_actuated()).count();
        Ok(KinematicChain {
            robot_name: robot_name.into(),
            base_link,
            tip_link,
            joints,
            origins,
            dof,
        })
    }

    pub fn robot_name(&self) -> &str {
        &self.robot_name
    }

    pub fn base_link(&self) -> &str {
        &self.base_link
    }

    pub fn tip_link(&self) -> &str {
        &self.tip_link
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub(crate) fn origins(&self) -> &[Isometry3<f64>] {
        &self.origins
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn actuated(&self) -> impl Iterator<Item = &JointSpec> {
        self.joints.iter().filter(|j| j.kind.is_actuated())
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.actuated().map(|j| j.name.clone()).collect()
    }

    /// Per actuated joint; `None` means unlimited.
    pub fn limits(&self) -> Vec<Option<JointLimits>> {
        self.actuated().map(|j| j.limits).collect()
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (value, joint) in q.iter_mut().zip(self.actuated()) {
            *value = joint.clamp(*value);
        }
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof
            && q
                .iter()
                .zip(self.actuated())
                .all(|(v, j)| j.limits.is_none_or(|l| l.contains(*v)))
    }

    /// All zeros, clamped into the limits.
    pub fn neutral(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.dof];
        self.clamp(&mut q);
        q
    }
}

impl RobotModel {
    /// Extracts the unique joint path from `base_link` down to `tip_link`.
    pub fn extract_chain(&self, base_link: &str, tip_link: &str) -> Result<KinematicChain, ChainError> {
        for link in [base_link, tip_link] {
            if !self.has_link(link) {
                return Err(ChainError::UnknownLink(link.to_owned()));
            }
        }
        let mut path = Vec::new();
        let mut link = tip_link;
        while link != base_link {
            match self.joint_with_child(link) {
                Some(joint) => {
                    path.push(joint.clone());
                    link = joint.parent_link.as_str();
                }
                None => {
                    return Err(ChainError::NotDescendant {
                        base: base_link.to_owned(),
                        tip: tip_link.to_owned(),
                    })
                }
            }
        }
        path.reverse();
        KinematicChain::new(self.name.clone(), base_link, tip_link, path)
    }
}
