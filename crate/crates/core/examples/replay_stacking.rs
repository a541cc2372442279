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

//! Replay the bundled perfect-stacking recording against the simulated
//! robot and scene, instantly and with rate-limited tracking, and append
//! the result to a results log.
//!
//! Pass `--realtime` to issue commands at the recorded 20 Hz pacing.

use std::sync::Arc;

use kt_core::config::EngineConfig;
use kt_core::engine::load_script;
use kt_core::metrics::{append_record, read_records, session_report};
use kt_core::pipeline::{teach_scripted, Clock};
use kt_core::playback::{load_trajectory, play, PlaybackClock, PlaybackOptions, SimController, TrackingMode};
use kt_core::scene::spawn_scene;

fn main() {
    let realtime = std::env::args().any(|a| a == "--realtime");
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = EngineConfig::from_file(fixtures.join("engine.toml")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("demo.jsonl");
    let script = load_script(fixtures.join("perfect_stacking.jsonl")).unwrap();
    teach_scripted(&config, &script, &file, Clock::Fast).unwrap();

    let chain = config.load_chain().unwrap();
    let loaded = load_trajectory(&file, Some(&chain), false).unwrap();
    println!(
        "{}: {} states, {} joints, {:.2} s",
        loaded.header.session_id,
        loaded.trajectory.states.len(),
        loaded.header.dof,
        loaded.trajectory.duration_ms() as f64 / 1000.0
    );

    let options = PlaybackOptions {
        clock: if realtime { PlaybackClock::Realtime } else { PlaybackClock::Virtual },
        telemetry: None,
    };
    let log = tmp.path().join("results.jsonl");
    for mode in [TrackingMode::Instant, TrackingMode::rate_limited()] {
        let first = loaded.trajectory.states[0].q.clone();
        let mut controller = SimController::new(Arc::clone(&chain), first, mode).unwrap();
        let mut scene = spawn_scene(&config.scene_config().unwrap()).unwrap();
        let report = play(&loaded.trajectory, &mut controller, Some(&mut scene), &options).unwrap();
        println!(
            "{mode:?}: {:.2} s, {} faults, max tracking error {:.4} rad, stacked {}",
            report.duration_s,
            report.faults().count(),
            report.max_tracking_error(),
            scene.count_stacked().unwrap()
        );
        append_record(&log, &session_report(&loaded, &report, &scene).unwrap()).unwrap();
    }
    println!("results log holds {} records", read_records(&log).unwrap().len());
}
