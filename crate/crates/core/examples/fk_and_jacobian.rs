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

//! Forward kinematics and the geometric Jacobian on the bundled arms.

use kt_core::fixtures::Fixture;
use kt_core::kinematics::{forward_kinematics, jacobian, link_frames};

fn main() {
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        let q = fixture.home_pose();
        let tip = forward_kinematics(&chain, &q).unwrap();
        println!("{} ({} joints: {})", chain.robot_name(), chain.dof(), chain.joint_names().join(", "));
        println!("  home q = {q:?}");
        println!("  tip position = {:.4?}", tip.position.as_slice());
        println!("  tip quaternion (wxyz) = {:.4?}", tip.wxyz());
        // frame 0 is the base; each joint then places its child link
        for (joint, frame) in chain.joints().iter().zip(link_frames(&chain, &q).unwrap().iter().skip(1)) {
            println!("    {:<12} at {:.3?}", joint.name, frame.position.as_slice());
        }
        let j = jacobian(&chain, &q).unwrap();
        println!("  Jacobian (6 x {}):", j.ncols());
        for row in j.row_iter() {
            println!("    {:>8.4?}", row.iter().collect::<Vec<_>>());
        }
    }
}
