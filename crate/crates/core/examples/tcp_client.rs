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

//! Runs the engine service in-process and talks to it as an external client
//! would: length-prefixed JSON frames over TCP. Drags the sphere, records a
//! short demonstration, and watches telemetry.
//!
//! Against a running `kt serve`, pass its TCP address as the first argument.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use kt_core::config::EngineConfig;
use kt_core::kinematics::Pose;
use kt_core::server::{serve, ServeOptions};
use kt_core::streaming::net::TcpClient;
use kt_core::streaming::topics::{COMMANDS, TELEMETRY};
use kt_core::streaming::{Body, CommandKind, Envelope};

fn main() {
    let stop = Arc::new(AtomicBool::new(false));
    let tmp = tempfile::tempdir().unwrap();
    let (addr, server) = match std::env::args().nth(1) {
        Some(addr) => (addr, None),
        None => {
            let config = EngineConfig {
                bind: "127.0.0.1:0".into(),
                ws_bind: "127.0.0.1:0".into(),
                recordings_dir: tmp.path().to_path_buf(),
                ..EngineConfig::default()
            };
            let (tx, rx) = mpsc::channel();
            let options = ServeOptions { duration: None, stop: Some(stop.clone()), ready: Some(tx) };
            let handle = thread::spawn(move || serve(&config, options));
            let info = rx.recv().unwrap();
            println!("engine up: {} ({} joints), tcp {}, ws {}", info.robot, info.dof, info.tcp, info.ws);
            (info.tcp.to_string(), Some(handle))
        }
    };

    let mut watcher = TcpClient::connect(&addr).unwrap();
    watcher.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
    watcher.subscribe(TELEMETRY, 0).unwrap();
    let mut teacher = TcpClient::connect(&addr).unwrap();

    teacher.publish(&Envelope::command(COMMANDS, "", 0, CommandKind::Start)).unwrap();
    let started = Instant::now();
    let mut frames = 0;
    let mut last = None;
    for i in 0..30 {
        let pose = Pose::from_position(0.45, -0.1 + 0.01 * i as f64, 0.35);
        teacher.publish(&Envelope::sphere("", 0, pose)).unwrap();
        let until = Instant::now() + Duration::from_millis(50);
        while Instant::now() < until {
            if let Ok(Some(msg)) = watcher.recv() {
                frames += 1;
                last = Some(msg);
            }
        }
    }
    teacher.publish(&Envelope::command(COMMANDS, "", 0, CommandKind::Stop)).unwrap();
    let secs = started.elapsed().as_secs_f64();
    println!("{frames} telemetry frames in {secs:.1} s ({:.0}/s)", frames as f64 / secs);
    if let Some(Envelope { session_id, body: Body::Telemetry(t), .. }) = last {
        println!("last frame: session '{session_id}', mode {:?}, q {:.3?}", t.mode, t.q);
    }

    if let Some(handle) = server {
        thread::sleep(Duration::from_millis(300));
        stop.store(true, Ordering::Relaxed);
        let summary = handle.join().unwrap().unwrap();
        for (path, finalized) in summary.recordings {
            println!("recorded {} (finalized {finalized})", path.display());
        }
    }
}
