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

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use kt_core::config::EngineConfig;
use kt_core::kinematics::Pose;
use kt_core::server::{serve, ServeOptions};
use kt_core::streaming::net::TcpClient;
use kt_core::streaming::topics::{COMMANDS, PLAYBACK, TELEMETRY};
use kt_core::streaming::{Body, CommandKind, Envelope};

fn recv_for(client: &mut TcpClient, window: Duration) -> Vec<Envelope> {
    let deadline = Instant::now() + window;
    let mut got = Vec::new();
    while Instant::now() < deadline {
        if let Ok(Some(msg)) = client.recv() {
            got.push(msg);
        }
    }
    got
}

#[test]
fn live_teach_and_replay_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let config = EngineConfig {
        bind: "127.0.0.1:0".into(),
        ws_bind: "127.0.0.1:0".into(),
        recordings_dir: dir.path().to_path_buf(),
        ..EngineConfig::default()
    };
    let (ready_tx, ready_rx) = mpsc::channel();
    let stop = Arc::new(AtomicBool::new(false));
    let options = ServeOptions {
        duration: Some(Duration::from_secs(30)),
        stop: Some(stop.clone()),
        ready: Some(ready_tx),
    };
    let server = thread::spawn(move || serve(&config, options));
    let info = ready_rx.recv_timeout(Duration::from_secs(10)).expect("service up");
    assert_eq!(info.dof, 7);

    let mut telemetry = TcpClient::connect(info.tcp).unwrap();
    telemetry.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
    telemetry.subscribe(TELEMETRY, 0).unwrap();
    let mut control = TcpClient::connect(info.tcp).unwrap();

    control.publish(&Envelope::command(COMMANDS, "", 0, CommandKind::Start)).unwrap();
    let feeder = {
        let mut client = TcpClient::connect(info.tcp).unwrap();
        thread::spawn(move || {
            for i in 0..40 {
                let pose = Pose::from_position(0.4, 0.1 * (i as f64 / 40.0), 0.4);
                client.publish(&Envelope::sphere("", 0, pose)).unwrap();
                thread::sleep(Duration::from_millis(50));
            }
        })
    };
    let seen = recv_for(&mut telemetry, Duration::from_secs(2));
    feeder.join().unwrap();
    control.publish(&Envelope::command(COMMANDS, "", 0, CommandKind::Stop)).unwrap();

    // one telemetry frame per record tick at 20 Hz, from whenever the stream was joined
    assert!(seen.len() >= 35, "only {} telemetry messages in 2 s", seen.len());
    assert!(seen.iter().all(|m| matches!(m.body, Body::Telemetry(_))));
    // seq counts per session
    let mut last: std::collections::HashMap<String, u64> = Default::default();
    for m in &seen {
        if let Some(prev) = last.insert(m.session_id.clone(), m.seq) {
            assert!(m.seq > prev, "{} after {prev} in '{}'", m.seq, m.session_id);
        }
    }

    // wait for the recording, then replay it
    let deadline = Instant::now() + Duration::from_secs(5);
    while std::fs::read_dir(dir.path()).unwrap().count() == 0 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(50));
    }
    thread::sleep(Duration::from_millis(300));
    let mut progress = TcpClient::connect(info.tcp).unwrap();
    progress.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
    progress.subscribe(PLAYBACK, 0).unwrap();
    control.publish(&Envelope::command(COMMANDS, "", 0, CommandKind::Replay)).unwrap();
    let played = recv_for(&mut progress, Duration::from_secs(3));
    assert!(!played.is_empty(), "no playback progress");

    stop.store(true, Ordering::Relaxed);
    let summary = server.join().unwrap().unwrap();
    assert_eq!(summary.recordings.len(), 1);
    assert!(summary.recordings[0].1, "recording not finalized");
    assert!(summary.ik_ticks > 0 && summary.record_ticks > 0);
}
