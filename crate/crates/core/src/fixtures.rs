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

//! Robot descriptions bundled with the crate.

use crate::kinematics::{KinematicChain, RobotModel};

pub const PLANAR_2LINK_URDF: &str = include_str!("../fixtures/planar_2link.urdf");
pub const ARM_6DOF_URDF: &str = include_str!("../fixtures/arm_6dof.urdf");
pub const ARM_7DOF_URDF: &str = include_str!("../fixtures/arm_7dof.urdf");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Planar2Link,
    Arm6Dof,
    Arm7Dof,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Planar2Link, Fixture::Arm6Dof, Fixture::Arm7Dof];

    pub fn urdf(self) -> &'static str {
        match self {
            Fixture::Planar2Link => PLANAR_2LINK_URDF,
            Fixture::Arm6Dof => ARM_6DOF_URDF,
            Fixture::Arm7Dof => ARM_7DOF_URDF,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Fixture::Planar2Link => "planar_2link.urdf",
            Fixture::Arm6Dof => "arm_6dof.urdf",
            Fixture::Arm7Dof => "arm_7dof.urdf",
        }
    }

    /// (base link, tip link) of the taught arm.
    pub fn chain_links(self) -> (&'static str, &'static str) {
        match self {
            Fixture::Planar2Link => ("base_link", "tip"),
            Fixture::Arm6Dof | Fixture::Arm7Dof => ("base_link", "wrist_link"),
        }
    }

    pub fn model(self) -> RobotModel {
        RobotModel::from_urdf_str(self.urdf()).expect("bundled fixture parses")
    }

    pub fn chain(self) -> KinematicChain {
        let (base, tip) = self.chain_links();
        self.model()
            .extract_chain(base, tip)
            .expect("bundled fixture has the documented chain")
    }

    /// `name` attribute of the fixture's robot element.
    pub fn robot_name(self) -> &'static str {
        match self {
            Fixture::Planar2Link => "planar_2link",
            Fixture::Arm6Dof => "arm_6dof",
            Fixture::Arm7Dof => "arm_7dof",
        }
    }

    /// Start configuration for teaching: wrist above the table pointing
    /// down for the arms, slightly bent for the planar arm.
    pub fn home_pose(self) -> Vec<f64> {
        match self {
            Fixture::Planar2Link => vec![0.3, 0.4],
            Fixture::Arm6Dof => vec![0.0, 0.4, 1.2, 0.0, 1.5, 0.0],
            Fixture::Arm7Dof => vec![0.0, -0.785, 0.0, -2.356, 0.0, 1.571, 0.785],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_home_poses_match_models() {
        for f in Fixture::ALL {
            assert_eq!(f.model().name, f.robot_name());
            let chain = f.chain();
            assert_eq!(f.home_pose().len(), chain.dof());
            assert!(chain.within_limits(&f.home_pose()), "{f:?}");
        }
    }
}
