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

mod common;

use kt_core::fixtures::Fixture;
use kt_core::kinematics::{forward_kinematics, jacobian, JointKind, RobotModel};
use nalgebra::Isometry3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn seven_dof_fixture_joint_count_matches_text_scan() {
    let text = std::fs::read_to_string(common::fixture_path("arm_7dof.urdf")).unwrap();
    let scanned = ["\"revolute\"", "\"continuous\"", "\"prismatic\""]
        .iter()
        .map(|kind| text.matches(&format!("type={kind}")).count())
        .sum::<usize>();
    let model = RobotModel::from_urdf_file(common::fixture_path("arm_7dof.urdf")).unwrap();
    assert_eq!(scanned, 7);
    assert_eq!(model.dof(), scanned);
}

#[test]
fn seven_dof_path_enumeration() {
    // walk child -> parent links by hand from the fixture's joint list
    let model = Fixture::Arm7Dof.model();
    let mut link = "wrist_link".to_string();
    let mut actuated = 0;
    while link != "base_link" {
        let joint = model.joints.iter().find(|j| j.child_link == link).unwrap();
        if joint.kind != JointKind::Fixed {
            actuated += 1;
        }
        link = joint.parent_link.clone();
    }
    let chain = model.extract_chain("base_link", "wrist_link").unwrap();
    assert_eq!(chain.dof(), actuated);
    assert_eq!(chain.dof(), 7);
}

#[test]
fn missing_urdf_file_names_path() {
    let err = RobotModel::from_urdf_file("/nonexistent/robot.urdf").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/robot.urdf"));
}

#[test]
fn fk_at_zero_is_product_of_origins() {
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        let zeros = vec![0.0; chain.dof()];
        let fk = forward_kinematics(&chain, &zeros).unwrap();
        let product = chain
            .joints()
            .iter()
            .fold(Isometry3::identity(), |acc, j| acc * j.origin_transform());
        assert!((fk.position - product.translation.vector).norm() < 1e-12);
        assert!(fk.orientation.angle_to(&product.rotation) < 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences_on_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        for _ in 0..100 {
            let q = common::random_q(&chain, &mut rng);
            let analytic = jacobian(&chain, &q).unwrap();
            let numeric = common::finite_difference_jacobian(&chain, &q, 1e-6);
            let worst = (analytic - numeric).abs().max();
            assert!(worst < 1e-5, "{fixture:?} q={q:?} diff={worst}");
        }
    }
}

proptest! {
    #[test]
    fn planar_closed_form(q1 in -std::f64::consts::PI..std::f64::consts::PI,
                          q2 in -std::f64::consts::PI..std::f64::consts::PI) {
        let pose = forward_kinematics(&Fixture::Planar2Link.chain(), &[q1, q2]).unwrap();
        let x = 0.5 * q1.cos() + 0.5 * (q1 + q2).cos();
        let y = 0.5 * q1.sin() + 0.5 * (q1 + q2).sin();
        prop_assert!((pose.position.x - x).abs() < 1e-9);
        prop_assert!((pose.position.y - y).abs() < 1e-9);
        prop_assert!(pose.position.z.abs() < 1e-9);
    }

    #[test]
    fn fk_quaternion_is_unit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for fixture in Fixture::ALL {
            let chain = fixture.chain();
            let q = common::random_q(&chain, &mut rng);
            let pose = forward_kinematics(&chain, &q).unwrap();
            prop_assert!((pose.orientation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn urdf_round_trip_random_models(
        joints in prop::collection::vec(
            (0u8..4, prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-3.0f64..3.0),
             prop::array::uniform3(-1.0f64..1.0), -3.0f64..0.0, 0.0f64..3.0),
            1..8)
    ) {
        let mut doc = String::from("<robot name=\"random\">\n<link name=\"l0\"/>\n");
        for (i, (kind, xyz, rpy, axis, lower, upper)) in joints.iter().enumerate() {
            let kind = ["revolute", "continuous", "prismatic", "fixed"][*kind as usize];
            let axis = if axis.iter().all(|a| a.abs() < 1e-3) { [0.0, 0.0, 1.0] } else { *axis };
            doc.push_str(&format!(
                "<link name=\"l{}\"/><joint name=\"j{i}\" type=\"{kind}\"><parent link=\"l{i}\"/><child link=\"l{}\"/>\
                 <origin xyz=\"{} {} {}\" rpy=\"{} {} {}\"/><axis xyz=\"{} {} {}\"/><limit lower=\"{lower}\" upper=\"{upper}\"/></joint>\n",
                i + 1, i + 1, xyz[0], xyz[1], xyz[2], rpy[0], rpy[1], rpy[2], axis[0], axis[1], axis[2]));
        }
        doc.push_str("</robot>");
        let first = RobotModel::from_urdf_str(&doc).unwrap();
        let second = RobotModel::from_urdf_str(&first.to_urdf_string()).unwrap();
        prop_assert_eq!(&first.links, &second.links);
        prop_assert_eq!(first.joints.len(), second.joints.len());
        for (a, b) in first.joints.iter().zip(&second.joints) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(a.kind, b.kind);
            prop_assert_eq!(&a.parent_link, &b.parent_link);
            prop_assert!((a.origin_translation - b.origin_translation).norm() < 1e-12);
            prop_assert!((a.origin_rotation - b.origin_rotation).norm() < 1e-12);
            prop_assert!((a.axis - b.axis).norm() < 1e-12);
            match (a.limits, b.limits) {
                (Some(x), Some(y)) => {
                    prop_assert!((x.lower - y.lower).abs() < 1e-12);
                    prop_assert!((x.upper - y.upper).abs() < 1e-12);
                }
                (None, None) => {}
                _ => prop_assert!(false, "limits changed"),
            }
        }
    }
}
