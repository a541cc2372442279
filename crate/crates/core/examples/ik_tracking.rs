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

//! Servoing the 7-DoF arm after a moving target, one damped least-squares
//! step per 30 Hz tick, then a full solve for comparison.

use kt_core::fixtures::Fixture;
use kt_core::ik::{servo_step, solve_ik, IkParams};
use kt_core::kinematics::forward_kinematics;
use nalgebra::Vector3;

fn main() {
    let chain = Fixture::Arm7Dof.chain();
    let params = IkParams::default();
    let mut q = Fixture::Arm7Dof.home_pose();
    let start = forward_kinematics(&chain, &q).unwrap();

    // sweep the target 20 cm sideways over two seconds
    for tick in 0..=60 {
        let offset = Vector3::new(0.0, 0.2 * (tick as f64 / 60.0), 0.0);
        let target = start.with_position(start.position + offset);
        q = servo_step(&chain, &target, &q, &params).unwrap();
        if tick % 10 == 0 {
            let tip = forward_kinematics(&chain, &q).unwrap();
            println!(
                "tick {tick:>2}: tracking error {:.4} m",
                (tip.position - target.position).norm()
            );
        }
    }

    let target = start.with_position(start.position + Vector3::new(0.05, 0.2, -0.1));
    let solved = solve_ik(&chain, &target, &q, &IkParams { max_iterations: 300, ..params }).unwrap();
    println!(
        "solve: converged={} after {} iterations, position error {:.2e} m, orientation error {:.2e} rad",
        solved.converged, solved.iterations, solved.position_error, solved.orientation_error
    );
}
