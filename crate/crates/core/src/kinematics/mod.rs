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

//! Robot structure and kinematics.
//!
//! A URDF document is parsed into a [`RobotModel`] (links plus joint specs),
//! from which a serial [`KinematicChain`] between two links is extracted.
//! Forward kinematics and the geometric Jacobian operate directly on the
//! URDF joint frames: each joint contributes its constant origin transform
//! followed by its motion transform.

mod chain;
mod pose;
mod urdf;

pub use chain::{ChainError, KinematicChain};
pub use pose::Pose;
pub use urdf::{JointKind, JointLimits, JointSpec, ParseError, RobotModel, UrdfError};

use nalgebra::{Isometry3, Matrix6xX, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Joint vector length does not match the chain.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expected {expected} joint values, got {actual}")]
pub struct DimensionError {
    pub expected: usize,
    pub actual: usize,
}

fn check_dim(chain: &KinematicChain, q: &[f64]) -> Result<(), DimensionError> {
    if q.len() == chain.dof() {
        Ok(())
    } else {
        Err(DimensionError {
            expected: chain.dof(),
            actual: q.len(),
        })
    }
}

fn motion(joint: &JointSpec, value: f64) -> Isometry3<f64> {
    match joint.kind {
        JointKind::Revolute | JointKind::Continuous => Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&joint.unit_axis(), value),
        ),
        JointKind::Prismatic => Isometry3::from_parts(
            Translation3::from(joint.axis * value),
            UnitQuaternion::identity(),
        ),
        JointKind::Fixed => Isometry3::identity(),
    }
}

/// Walks the chain, calling `visit` with the world transform of each joint
/// frame (after its origin, before its motion) and the joint's value.
/// Returns the tip transform.
fn walk<F>(chain: &KinematicChain, q: &[f64], mut visit: F) -> Isometry3<f64>
where
    F: FnMut(usize, &JointSpec, &Isometry3<f64>),
{
    let mut transform = Isometry3::identity();
    let mut values = q.iter();
    for (index, (joint, origin)) in chain.joints().iter().zip(chain.origins()).enumerate() {
        transform *= origin;
        visit(index, joint, &transform);
        if joint.kind.is_actuated() {
            // length was checked by the caller
            let value = *values.next().expect("joint vector shorter than dof");
            transform *= motion(joint, value);
        }
    }
    transform
}

/// Pose of the tip frame in the base frame.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Pose, DimensionError> {
    check_dim(chain, q)?;
    let tip = walk(chain, q, |_, _, _| {});
    Ok(Pose::from_isometry(&tip))
}

/// World frames of every link along the chain, base first and tip last.
///
/// Used for skeleton rendering; the last entry equals [`forward_kinematics`].
pub fn link_frames(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Pose>, DimensionError> {
    check_dim(chain, q)?;
    let mut frames = vec![Pose::identity()];
    let mut transform = Isometry3::identity();
    let mut values = q.iter();
    for (joint, origin) in chain.joints().iter().zip(chain.origins()) {
        transform *= origin;
        if joint.kind.is_actuated() {
            transform *= motion(joint, *values.next().expect("checked"));
        }
        frames.push(Pose::from_isometry(&transform));
    }
    Ok(frames)
}

/// Geometric Jacobian (6 × dof), linear rows first, expressed in the base frame.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Matrix6xX<f64>, DimensionError> {
    check_dim(chain, q)?;
    let mut axes: Vec<(JointKind, Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(chain.dof());
    let tip = walk(chain, q, |_, joint, frame| {
        if joint.kind.is_actuated() {
            let axis = frame.rotation * joint.unit_axis().into_inner();
            axes.push((joint.kind, axis, frame.translation.vector));
        }
    });
    let tip_position = tip.translation.vector;

    let mut jac = Matrix6xX::zeros(chain.dof());
    for (col, (kind, axis, origin)) in axes.into_iter().enumerate() {
        let (linear, angular) = match kind {
            JointKind::Prismatic => (axis, Vector3::zeros()),
            _ => (axis.cross(&(tip_position - origin)), axis),
        };
        jac.fixed_view_mut::<3, 1>(0, col).copy_from(&linear);
        jac.fixed_view_mut::<3, 1>(3, col).copy_from(&angular);
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn planar() -> KinematicChain {
        let model = RobotModel::from_urdf_str(include_str!("../../fixtures/planar_2link.urdf"))
            .unwrap();
        model.extract_chain("base_link", "tip").unwrap()
    }

    #[test]
    fn planar_straight() {
        let pose = forward_kinematics(&planar(), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(pose.orientation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_single_rotation() {
        let pose = forward_kinematics(&planar(), &[FRAC_PI_2, 0.0]).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn planar_elbow_bent() {
        // hand-computed: link 1 points +y, link 2 turned back to +x
        let pose = forward_kinematics(&planar(), &[FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.5, 0.5, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let err = forward_kinematics(&planar(), &[0.0]).unwrap_err();
        assert_eq!(err, DimensionError { expected: 2, actual: 1 });
        assert!(jacobian(&planar(), &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn planar_jacobian_at_zero() {
        let jac = jacobian(&planar(), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(jac[(0, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(jac[(1, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(jac[(2, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(jac[(5, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(jac[(1, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn prismatic_column() {
        let urdf = r#"<robot name="slider">
            <link name="a"/><link name="b"/>
            <joint name="lift" type="prismatic">
              <parent link="a"/><child link="b"/>
              <origin xyz="0.1 0.2 0.3"/>
              <axis xyz="0 0 1"/>
              <limit lower="0" upper="0.5"/>
            </joint></robot>"#;
        let chain = RobotModel::from_urdf_str(urdf)
            .unwrap()
            .extract_chain("a", "b")
            .unwrap();
        let jac = jacobian(&chain, &[0.2]).unwrap();
        let col: Vec<f64> = jac.column(0).iter().copied().collect();
        assert_eq!(col, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let pose = forward_kinematics(&chain, &[0.2]).unwrap();
        assert_relative_eq!(pose.position, Vector3::new(0.1, 0.2, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn link_frames_end_at_tip() {
        let chain = planar();
        let q = [0.3, -0.7];
        let frames = link_frames(&chain, &q).unwrap();
        assert_eq!(frames.len(), chain.joints().len() + 1);
        let tip = forward_kinematics(&chain, &q).unwrap();
        assert_relative_eq!(frames.last().unwrap().position, tip.position, epsilon = 1e-15);
    }
}
