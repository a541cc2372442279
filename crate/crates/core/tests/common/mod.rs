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

#![allow(dead_code)]

use kt_core::kinematics::{forward_kinematics, KinematicChain};
use nalgebra::{Matrix6xX, Vector3};
use rand::Rng;
use std::f64::consts::PI;

/// Uniform sample inside the joint limits; unlimited joints use [-π, π].
pub fn random_q<R: Rng>(chain: &KinematicChain, rng: &mut R) -> Vec<f64> {
    chain
        .limits()
        .into_iter()
        .map(|l| match l {
            Some(l) if l.lower < l.upper => rng.gen_range(l.lower..=l.upper),
            Some(l) => l.lower,
            None => rng.gen_range(-PI..=PI),
        })
        .collect()
}

/// Central finite differences of forward kinematics. Angular columns come
/// from the rotation vector of R(q + h) R(q - h)ᵀ.
pub fn finite_difference_jacobian(chain: &KinematicChain, q: &[f64], h: f64) -> Matrix6xX<f64> {
    let mut jac = Matrix6xX::zeros(q.len());
    for i in 0..q.len() {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let a = forward_kinematics(chain, &plus).unwrap();
        let b = forward_kinematics(chain, &minus).unwrap();
        let linear: Vector3<f64> = (a.position - b.position) / (2.0 * h);
        let angular: Vector3<f64> = (a.orientation * b.orientation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, i)] = linear[r];
            jac[(r + 3, i)] = angular[r];
        }
    }
    jac
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
