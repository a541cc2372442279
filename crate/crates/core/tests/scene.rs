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

use kt_core::kinematics::Pose;
use kt_core::scene::{spawn_scene, Scene, SceneConfig, Support};
use kt_core::session::Gripper;
use proptest::prelude::*;

fn arb_wrist(config: &SceneConfig) -> impl Strategy<Value = Pose> {
    // biased toward the cubes and the target so grasps and stacks happen
    let mut anchors: Vec<[f64; 2]> = config.cubes.iter().map(|c| c.xy).collect();
    anchors.push(config.target_base_xy);
    (0..anchors.len(), -0.03f64..0.03, -0.03f64..0.03, 0.0f64..0.3).prop_map(move |(i, dx, dy, z)| {
        Pose::from_position(anchors[i][0] + dx, anchors[i][1] + dy, z)
    })
}

fn arb_gripper() -> impl Strategy<Value = Gripper> {
    prop_oneof![Just(Gripper::Open), Just(Gripper::Closed)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn invariants_hold_under_random_steps(
        steps in prop::collection::vec((arb_wrist(&SceneConfig::default()), arb_gripper()), 1..80)
    ) {
        let mut scene = spawn_scene(&SceneConfig::default()).unwrap();
        for (wrist, gripper) in steps {
            let next = scene.step(&wrist, gripper);
            // pure: same inputs, same result
            prop_assert_eq!(&next, &scene.step(&wrist, gripper));
            prop_assert_eq!(next.cubes().len(), 4);
            prop_assert!(next.check_invariants().is_ok(), "{:?}", next.check_invariants());
            if let Some(held) = next.attached() {
                // rigid with the wrist, unless the table stops it
                let d = (held.pose.position - wrist.position).norm();
                prop_assert!(d <= next.config().grasp_radius + 1e-9 || held.pose.position.z <= 0.025 + 1e-9);
            }
            scene = next;
        }
        let released = scene.step(&Pose::from_position(0.0, 0.0, 0.5), Gripper::Open);
        let count = released.count_stacked().unwrap();
        prop_assert!(count <= 4);
    }

    // within ±6 mm of the base, consecutive cubes overlap by more than half
    #[test]
    fn correct_placement_extends_the_prefix(jitter in prop::collection::vec((-0.006f64..0.006, -0.006f64..0.006), 4)) {
        let mut scene = spawn_scene(&SceneConfig::default()).unwrap();
        let [bx, by] = scene.config().target_base_xy;
        let order = scene.config().target_order.clone();
        for (k, (id, (dx, dy))) in order.iter().zip(jitter).enumerate() {
            prop_assert_eq!(scene.count_stacked().unwrap(), k);
            scene.place(id, bx + dx, by + dy).unwrap();
            prop_assert_eq!(scene.count_stacked().unwrap(), k + 1);
        }
    }
}

fn gripper_stack(scene: Scene, moves: &[(&str, f64, f64)]) -> Scene {
    let mut scene = scene;
    for (id, x, y) in moves {
        let c = scene.cube(id).unwrap().pose.position;
        scene = scene
            .step(&Pose::from_position(c.x, c.y, c.z), Gripper::Closed)
            .step(&Pose::from_position(c.x, c.y, 0.3), Gripper::Closed)
            .step(&Pose::from_position(*x, *y, 0.3), Gripper::Closed);
        // lower onto whatever is there, then release
        scene = scene.step(&Pose::from_position(*x, *y, 0.2), Gripper::Open);
    }
    scene
}

#[test]
fn prefix_rule_by_hand() {
    let scene = spawn_scene(&SceneConfig::default()).unwrap();
    let [bx, by] = scene.config().target_base_xy;
    // red and green stacked at the target, blue on the table elsewhere
    let scene = gripper_stack(scene, &[("red", bx, by), ("green", bx + 0.01, by), ("blue", 0.3, 0.35)]);
    assert_eq!(scene.cube("green").unwrap().support, Support::Cube("red".into()));
    assert_eq!(scene.cube("blue").unwrap().support, Support::Table);
    assert_eq!(scene.count_stacked().unwrap(), 2);
    // blue on green but yellow first: order broken at yellow
    let scene = gripper_stack(scene, &[("yellow", bx, by), ("blue", bx, by)]);
    assert_eq!(scene.count_stacked().unwrap(), 2);
}

#[test]
fn full_stack_by_gripper() {
    let scene = spawn_scene(&SceneConfig::default()).unwrap();
    let [bx, by] = scene.config().target_base_xy;
    let scene = gripper_stack(
        scene,
        &[("red", bx, by), ("green", bx, by), ("blue", bx, by), ("yellow", bx, by)],
    );
    assert_eq!(scene.count_stacked().unwrap(), 4);
    assert!(scene.check_invariants().is_ok());
}

#[test]
fn seeded_layouts() {
    for seed in 0..50 {
        let config = SceneConfig::randomized(seed, (0.35, 0.65), (-0.4, 0.4));
        let scene = spawn_scene(&config).unwrap();
        assert!(scene.cubes().iter().all(|c| c.support == Support::Table));
        assert_eq!(config, SceneConfig::randomized(seed, (0.35, 0.65), (-0.4, 0.4)));
    }
}
