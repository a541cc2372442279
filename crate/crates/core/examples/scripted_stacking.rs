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

//! Generate the perfect-stacking demonstration, teach it through the
//! session, broker and buffer, replay the file, and count the stack. Then
//! repeat with noise on the sphere positions.

use kt_core::config::EngineConfig;
use kt_core::engine::StackingPlan;
use kt_core::pipeline::{noisy_stacking_trial, replay_file, stacking_script, teach_scripted, Clock, ReplayOptions};

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = EngineConfig::default();
    let script = stacking_script(&config, &StackingPlan::default()).unwrap();
    println!("script: {} events over {} ms", script.len(), script.last().unwrap().t_ms);

    let out = dir.join("perfect.jsonl");
    let taught = teach_scripted(&config, &script, &out, Clock::Fast).unwrap();
    println!("taught {}: {} states, finalized {}", taught.session_id, taught.states, taught.finalized);
    let replayed = replay_file(&config, &out, &ReplayOptions::default()).unwrap();
    println!("replayed {:.2} s, stacked {}", replayed.record.duration_s, replayed.stacked());

    for sigma_mm in [0.0, 5.0, 10.0, 20.0] {
        let counts: Vec<usize> = (0..5)
            .map(|seed| noisy_stacking_trial(&config, sigma_mm / 1000.0, seed, dir).unwrap().stacked())
            .collect();
        println!("sigma {sigma_mm:>4} mm: stacked {counts:?}");
    }
}
