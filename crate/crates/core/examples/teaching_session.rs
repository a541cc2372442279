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

//! A teaching session driven by hand: sphere poses at 30 Hz, state samples
//! at 20 Hz, and the start/close/open/stop voice commands.

use std::sync::Arc;

use kt_core::fixtures::Fixture;
use kt_core::ik::IkParams;
use kt_core::kinematics::forward_kinematics;
use kt_core::session::{Medium, SessionState, VoiceCommand, VoiceCommandKind};
use nalgebra::Vector3;

fn main() {
    let chain = Arc::new(Fixture::Arm7Dof.chain());
    let q0 = Fixture::Arm7Dof.home_pose();
    let home = forward_kinematics(&chain, &q0).unwrap();
    let mut session = SessionState::new(chain, IkParams::default(), q0).unwrap();

    let commands = [
        (0, VoiceCommandKind::Start),
        (1000, VoiceCommandKind::Close),
        (2000, VoiceCommandKind::Open),
        (3000, VoiceCommandKind::Stop),
    ];
    let mut pending = commands.iter().peekable();
    let (mut next_ik, mut next_rec) = (0u64, 0u64);
    for t in 0..=3000u64 {
        while let Some((_, kind)) = pending.next_if(|(at, _)| *at == t) {
            session.handle_voice(VoiceCommand::new(*kind, t)).unwrap();
            println!("{t:>5} ms  {kind:?} -> {:?}", session.mode());
        }
        if t == next_ik * 1000 / 30 {
            let lift = Vector3::new(0.0, 0.0, -0.1 * (t as f64 / 3000.0));
            session.tick_ik(home.with_position(home.position + lift)).unwrap();
            next_ik += 1;
        }
        if t == next_rec * 1000 / 20 {
            session.tick_record(t);
            next_rec += 1;
        }
    }
    // Idle again, so a second stop is rejected
    let rejected = session.handle_voice(VoiceCommand::new(VoiceCommandKind::Stop, 3001));
    println!("second stop: {}", rejected.unwrap_err());

    let (trajectory, act) = session.finalize().unwrap();
    println!(
        "session {}: {} states over {} ms",
        trajectory.session_id,
        trajectory.states.len(),
        trajectory.duration_ms()
    );
    println!("act interval {:?}, media {:?}", act.interval, act.media);
    for medium in [Medium::Gesture, Medium::Voice] {
        if let Some(c) = act.component(medium) {
            println!("  {medium:?}: {}..{} ms", c.start_ms, c.end_ms);
        }
    }
    for e in &act.events {
        println!("  {:?} at {} ms", e.kind, e.timestamp_ms);
    }
}
