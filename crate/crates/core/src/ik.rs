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

//! Damped least-squares inverse kinematics.
//!
//! Each update is `dq = step_scale * Jᵀ (J Jᵀ + λ² I)⁻¹ e`, where `e` stacks the
//! position difference and the rotation vector of `q_target * q_current⁻¹`.
//! Configurations are clamped to the joint limits after every update.

use nalgebra::{DMatrix, DVector, Matrix6, Matrix6xX, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{forward_kinematics, jacobian, DimensionError, KinematicChain, Pose};

const MAX_DAMPING: f64 = 1.0;
const MIN_RETRY_DAMPING: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum IkError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("invalid IK input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    /// λ in the damped pseudo-inverse.
    pub damping: f64,
    pub max_iterations: usize,
    /// metres
    pub position_tol: f64,
    /// radians
    pub orientation_tol: f64,
    /// fraction of the full damped step taken per update, in (0, 1]
    pub step_scale: f64,
    /// Weight of the orientation rows; 0 gives position-only tracking and
    /// drops orientation from the convergence test.
    pub orientation_weight: f64,
    /// Largest joint change (rad or m, infinity norm) one servo update may
    /// make.
    pub max_servo_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            damping: 0.05,
            max_iterations: 100,
            position_tol: 1e-4,
            orientation_tol: 1e-3,
            step_scale: 0.5,
            orientation_weight: 1.0,
            max_servo_step: 0.2,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), IkError> {
        let ok = self.damping >= 0.0
            && self.damping.is_finite()
            && self.max_iterations >= 1
            && self.position_tol > 0.0
            && self.orientation_tol > 0.0
            && self.step_scale > 0.0
            && self.step_scale <= 1.0
            && self.orientation_weight >= 0.0
            && self.orientation_weight.is_finite()
            && self.max_servo_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(IkError::Input(format!("invalid parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkResult {
    pub q: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// metres
    pub position_error: f64,
    /// radians
    pub orientation_error: f64,
}

/// Rotation vector of `target * current⁻¹`, shortest path.
pub fn orientation_error(current: &UnitQuaternion<f64>, target: &UnitQuaternion<f64>) -> Vector3<f64> {
    // product written out so that identical inputs cancel to exactly zero
    let (t, c) = (target.quaternion(), current.quaternion());
    let (tv, cv) = (t.imag(), c.imag());
    let w = t.w * c.w + tv.dot(&cv);
    let v = (tv * c.w - cv * t.w) - tv.cross(&cv);
    let (w, v) = if w < 0.0 { (-w, -v) } else { (w, v) };
    let sin_half = v.norm();
    if sin_half == 0.0 {
        return Vector3::zeros();
    }
    let angle = 2.0 * sin_half.atan2(w);
    v * (angle / sin_half)
}

/// Six-vector pose error, orientation rows scaled by `orientation_weight`.
pub fn pose_error(current: &Pose, target: &Pose, orientation_weight: f64) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = orientation_error(&current.orientation, &target.orientation) * orientation_weight;
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[derive(Debug, Clone, Copy)]
struct Residual {
    error: Vector6<f64>,
    position: f64,
    orientation: f64,
}

impl Residual {
    fn new(current: &Pose, target: &Pose, params: &IkParams) -> Self {
        let error = pose_error(current, target, params.orientation_weight);
        Residual {
            error,
            position: (target.position - current.position).norm(),
            orientation: orientation_error(&current.orientation, &target.orientation).norm(),
        }
    }

    fn norm(&self) -> f64 {
        self.error.norm()
    }

    fn within(&self, params: &IkParams) -> bool {
        self.position <= params.position_tol
            && (params.orientation_weight == 0.0 || self.orientation <= params.orientation_tol)
    }
}

fn damped_step(jac: &Matrix6xX<f64>, error: &Vector6<f64>, damping: f64, weight: f64) -> DVector<f64> {
    let mut weighted = jac.clone();
    for row in 3..6 {
        weighted.row_mut(row).scale_mut(weight);
    }
    let jjt: Matrix6<f64> = &weighted * weighted.transpose() + Matrix6::identity() * (damping * damping);
    let solved = match jjt.cholesky() {
        Some(chol) => chol.solve(error),
        None => {
            // λ = 0 at a singularity
            let pinv = DMatrix::from_iterator(6, 6, jjt.iter().copied())
                .pseudo_inverse(1e-12)
                .expect("pseudo-inverse of a finite matrix");
            let e = DVector::from_iterator(6, error.iter().copied());
            let s = pinv * e;
            Vector6::from_iterator(s.iter().copied())
        }
    };
    weighted.transpose() * solved
}

fn check_inputs(chain: &KinematicChain, target: &Pose, q: &[f64], params: &IkParams) -> Result<(), IkError> {
    params.validate()?;
    if q.len() != chain.dof() {
        return Err(DimensionError {
            expected: chain.dof(),
            actual: q.len(),
        }
        .into());
    }
    if !target.is_finite() {
        return Err(IkError::Input("target pose is not finite".into()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(IkError::Input("joint vector is not finite".into()));
    }
    Ok(())
}

fn apply(chain: &KinematicChain, q: &[f64], dq: &DVector<f64>, scale: f64) -> Vec<f64> {
    let mut next: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, d)| a + scale * d).collect();
    chain.clamp(&mut next);
    next
}

/// Iterates damped least-squares updates until the tolerances are met or
/// `max_iterations` is exhausted. Always returns the best iterate.
///
/// An update that increases the weighted error is rejected and λ is doubled
/// (up to 1.0) for the retry; λ resets after an accepted update, so the error
/// never increases between accepted iterates.
pub fn solve_ik(
    chain: &KinematicChain,
    target: &Pose,
    q_seed: &[f64],
    params: &IkParams,
) -> Result<IkResult, IkError> {
    solve(chain, target, q_seed, params, None)
}

/// Same as [`solve_ik`], also returning the error norm of the current iterate
/// after every iteration.
pub fn solve_ik_traced(
    chain: &KinematicChain,
    target: &Pose,
    q_seed: &[f64],
    params: &IkParams,
) -> Result<(IkResult, Vec<f64>), IkError> {
    let mut trace = Vec::new();
    let result = solve(chain, target, q_seed, params, Some(&mut trace))?;
    Ok((result, trace))
}

fn solve(
    chain: &KinematicChain,
    target: &Pose,
    q_seed: &[f64],
    params: &IkParams,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<IkResult, IkError> {
    check_inputs(chain, target, q_seed, params)?;

    let mut q = q_seed.to_vec();
    chain.clamp(&mut q);
    let mut residual = Residual::new(&forward_kinematics(chain, &q)?, target, params);
    let mut damping = params.damping;
    let mut iterations = 0;

    while iterations < params.max_iterations && !residual.within(params) {
        iterations += 1;
        let jac = jacobian(chain, &q)?;
        let dq = damped_step(&jac, &residual.error, damping, params.orientation_weight);
        let candidate = apply(chain, &q, &dq, params.step_scale);
        let next = Residual::new(&forward_kinematics(chain, &candidate)?, target, params);
        if next.norm() <= residual.norm() {
            q = candidate;
            residual = next;
            damping = params.damping;
        } else {
            damping = (damping * 2.0).clamp(MIN_RETRY_DAMPING, MAX_DAMPING);
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(residual.norm());
        }
    }

    Ok(IkResult {
        converged: residual.within(params),
        q,
        iterations,
        position_error: residual.position,
        orientation_error: residual.orientation,
    })
}

/// One damped least-squares update toward `target`, clamped to limits.
///
/// Meant to be called once per servo tick; no step rejection is applied.
pub fn servo_step(
    chain: &KinematicChain,
    target: &Pose,
    q_current: &[f64],
    params: &IkParams,
) -> Result<Vec<f64>, IkError> {
    check_inputs(chain, target, q_current, params)?;
    let current = forward_kinematics(chain, q_current)?;
    let error = pose_error(&current, target, params.orientation_weight);
    if error == Vector6::zeros() {
        return Ok(q_current.to_vec());
    }
    let jac = jacobian(chain, q_current)?;
    let mut dq = damped_step(&jac, &error, params.damping, params.orientation_weight) * params.step_scale;
    let largest = dq.amax();
    if largest > params.max_servo_step {
        dq *= params.max_servo_step / largest;
    }
    Ok(apply(chain, q_current, &dq, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::RobotModel;
    use std::f64::consts::PI;

    fn planar() -> KinematicChain {
        RobotModel::from_urdf_str(include_str!("../fixtures/planar_2link.urdf"))
            .unwrap()
            .extract_chain("base_link", "tip")
            .unwrap()
    }

    #[test]
    fn stretched_arm_solution() {
        let params = IkParams {
            max_iterations: 300,
            ..IkParams::default()
        };
        let result = solve_ik(&planar(), &Pose::from_position(1.0, 0.0, 0.0), &[0.1, -0.1], &params).unwrap();
        assert!(result.converged, "{result:?}");
        assert!(result.q[0].abs() < 1e-3 && result.q[1].abs() < 1e-3, "{:?}", result.q);
    }

    #[test]
    fn unreachable_target_is_best_effort() {
        let params = IkParams {
            max_iterations: 300,
            ..IkParams::default()
        };
        let result = solve_ik(&planar(), &Pose::from_position(1.5, 0.0, 0.0), &[0.1, -0.1], &params).unwrap();
        assert!(!result.converged);
        assert!((result.position_error - 0.5).abs() < 1e-3, "{result:?}");
        let tip = forward_kinematics(&planar(), &result.q).unwrap();
        assert!(tip.position.x > 0.999);
    }

    #[test]
    fn orientation_error_identical_is_exact_zero() {
        let q = UnitQuaternion::from_euler_angles(0.3, -1.2, 2.9);
        assert_eq!(orientation_error(&q, &q), Vector3::zeros());
    }

    #[test]
    fn orientation_error_takes_short_path() {
        let current = UnitQuaternion::identity();
        let target = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 1.5 * PI);
        let err = orientation_error(&current, &target);
        assert!((err.z + 0.5 * PI).abs() < 1e-12, "{err}");
    }

    #[test]
    fn servo_fixed_point() {
        let chain = planar();
        let q = vec![0.4, -1.1];
        let target = forward_kinematics(&chain, &q).unwrap();
        assert_eq!(servo_step(&chain, &target, &q, &IkParams::default()).unwrap(), q);
    }

    #[test]
    fn servo_clamps_at_limit() {
        let chain = planar();
        let q = vec![PI, 0.0];
        // target requires rotating shoulder further positive
        let target = forward_kinematics(&chain, &[-PI + 0.3, 0.0]).unwrap();
        let next = servo_step(&chain, &target, &q, &IkParams::default()).unwrap();
        assert_eq!(next[0], PI);
    }

    #[test]
    fn dimension_and_input_errors() {
        let chain = planar();
        assert!(matches!(
            solve_ik(&chain, &Pose::identity(), &[0.0], &IkParams::default()),
            Err(IkError::Dimension(_))
        ));
        let bad = Pose::from_position(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            solve_ik(&chain, &bad, &[0.0, 0.0], &IkParams::default()),
            Err(IkError::Input(_))
        ));
        assert!(matches!(
            servo_step(&chain, &bad, &[0.0, 0.0], &IkParams::default()),
            Err(IkError::Input(_))
        ));
    }

    #[test]
    fn invalid_params() {
        let params = IkParams {
            step_scale: 0.0,
            ..IkParams::default()
        };
        assert!(params.validate().is_err());
        assert!(IkParams::default().validate().is_ok());
    }

    #[test]
    fn position_only_mode_ignores_orientation() {
        let chain = planar();
        let target = Pose::new(
            Vector3::new(0.5, 0.5, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 1.0),
        );
        let params = IkParams {
            orientation_weight: 0.0,
            max_iterations: 300,
            ..IkParams::default()
        };
        let result = solve_ik(&chain, &target, &[0.3, 0.3], &params).unwrap();
        assert!(result.converged, "{result:?}");
    }

    #[test]
    fn solve_is_deterministic() {
        let chain = planar();
        let target = Pose::from_position(0.3, 0.6, 0.0);
        let a = solve_ik(&chain, &target, &[0.0, 0.5], &IkParams::default()).unwrap();
        let b = solve_ik(&chain, &target, &[0.0, 0.5], &IkParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
