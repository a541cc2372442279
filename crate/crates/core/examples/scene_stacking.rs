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

//! Place cubes directly and with the kinematic gripper, then score the
//! longest correctly stacked prefix of the target order.

use kt_core::kinematics::Pose;
use kt_core::scene::{spawn_scene, SceneConfig};
use kt_core::session::Gripper;

fn main() {
    let config = SceneConfig::default();
    let [bx, by] = config.target_base_xy;
    let mut scene = spawn_scene(&config).unwrap();

    // pick red up and drop it on the target base
    let red = scene.cube("red").unwrap().pose.position;
    scene.advance(&Pose::from_position(red.x, red.y, red.z), Gripper::Closed);
    scene.advance(&Pose::from_position(bx, by, 0.2), Gripper::Closed);
    scene.advance(&Pose::from_position(bx, by, 0.2), Gripper::Open);
    println!("after red: stacked {}", scene.count_stacked().unwrap());

    scene.place("green", bx + 0.004, by - 0.003).unwrap();
    // yellow before blue breaks the order
    scene.place("yellow", bx, by).unwrap();
    println!("green then yellow: stacked {}", scene.count_stacked().unwrap());

    // a cube dropped with too little overlap slides off the edge
    let mut side = spawn_scene(&config).unwrap();
    side.place("red", bx, by).unwrap();
    side.place("green", bx + 0.04, by).unwrap();
    let green = side.cube("green").unwrap();
    println!("green at x={:.3} on {:?}", green.pose.position.x, green.support);

    for cube in scene.telemetry() {
        println!("{:<7} {:.3?} on {:?}", cube.id, cube.pose.position.as_slice(), cube.support);
    }
    scene.check_invariants().unwrap();

    let shuffled = SceneConfig::randomized(7, (0.3, 0.7), (-0.4, 0.0));
    println!("seeded layout: {:?}", shuffled.cubes.iter().map(|c| c.xy).collect::<Vec<_>>());
}
