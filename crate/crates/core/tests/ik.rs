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
use kt_core::ik::{servo_step, solve_ik, solve_ik_traced, IkParams};
use kt_core::kinematics::{forward_kinematics, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params_300() -> IkParams {
    IkParams {
        max_iterations: 300,
        ..IkParams::default()
    }
}

#[test]
fn fk_generated_targets_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        let mut converged = 0;
        for _ in 0..100 {
            let q_star = common::random_q(&chain, &mut rng);
            let target = forward_kinematics(&chain, &q_star).unwrap();
            let seed: Vec<f64> = q_star.iter().map(|q| q + rng.gen_range(-0.2..=0.2)).collect();
            let result = solve_ik(&chain, &target, &seed, &params_300()).unwrap();
            assert!(chain.within_limits(&result.q));
            if result.converged && result.position_error < 1e-3 {
                converged += 1;
            }
        }
        println!("{fixture:?}: {converged}/100 converged");
        assert!(converged >= 95, "{fixture:?}: {converged}/100");
    }
}

#[test]
fn error_never_increases_across_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        for _ in 0..20 {
            let target = forward_kinematics(&chain, &common::random_q(&chain, &mut rng)).unwrap();
            let seed = common::random_q(&chain, &mut rng);
            let (_, trace) = solve_ik_traced(&chain, &target, &seed, &params_300()).unwrap();
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0], "{fixture:?}: {} -> {}", pair[0], pair[1]);
            }
        }
    }
}

#[test]
fn outputs_respect_limits_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for fixture in Fixture::ALL {
        let chain = fixture.chain();
        for _ in 0..50 {
            // far targets push joints into their limits
            let target = Pose::from_position(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let seed = common::random_q(&chain, &mut rng);
            let result = solve_ik(&chain, &target, &seed, &IkParams::default()).unwrap();
            for (value, limit) in result.q.iter().zip(chain.limits()) {
                if let Some(l) = limit {
                    assert!(*value >= l.lower && *value <= l.upper);
                }
            }
            let stepped = servo_step(&chain, &target, &seed, &IkParams::default()).unwrap();
            assert!(chain.within_limits(&stepped));
        }
    }
}

#[test]
fn converged_results_meet_tolerances() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let chain = Fixture::Arm6Dof.chain();
    let params = params_300();
    for _ in 0..30 {
        let target = forward_kinematics(&chain, &common::random_q(&chain, &mut rng)).unwrap();
        let result = solve_ik(&chain, &target, &chain.neutral(), &params).unwrap();
        if result.converged {
            assert!(result.position_error <= params.position_tol);
            assert!(result.orientation_error <= params.orientation_tol);
        }
    }
}

#[test]
fn servo_converges_to_solve_answer() {
    let chain = Fixture::Planar2Link.chain();
    let target = forward_kinematics(&chain, &[0.7, -1.2]).unwrap();
    let seed = vec![0.4, -0.8];
    let solved = solve_ik(&chain, &target, &seed, &params_300()).unwrap();
    assert!(solved.converged);

    let mut q = seed.clone();
    for _ in 0..200 {
        q = servo_step(&chain, &target, &q, &IkParams::default()).unwrap();
    }
    for (a, b) in q.iter().zip(&solved.q) {
        assert!((a - b).abs() < 1e-3, "servo {q:?} vs solve {:?}", solved.q);
    }

    let chain = Fixture::Arm7Dof.chain();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let q_star = common::random_q(&chain, &mut rng);
    let target = forward_kinematics(&chain, &q_star).unwrap();
    let seed: Vec<f64> = q_star.iter().map(|q| q + 0.1).collect();
    let solved = solve_ik(&chain, &target, &seed, &params_300()).unwrap();
    let mut q = seed.clone();
    for _ in 0..200 {
        q = servo_step(&chain, &target, &q, &IkParams::default()).unwrap();
    }
    let servo_tip = forward_kinematics(&chain, &q).unwrap();
    let solve_tip = forward_kinematics(&chain, &solved.q).unwrap();
    assert!((servo_tip.position - solve_tip.position).norm() < 1e-3);
}
