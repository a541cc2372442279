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

//! Long-running engine service for interactive teaching.
//!
//! Teacher input arrives on `kt.sphere` and `kt.commands` (from the TCP or
//! WebSocket endpoint); states, telemetry and scene snapshots go out on the
//! other topics. Every finished session is written to the recordings
//! directory. A `replay` command plays a recorded file back in real time
//! against the simulated controller, publishing progress on `kt.playback`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{error, info, warn};

use crate::config::EngineConfig;
use crate::engine::{Engine, ScriptAction};
use crate::pipeline::{replay_file, robot, PipelineError, ReplayOptions};
use crate::playback::PlaybackClock;
use crate::scene::spawn_scene;
use crate::session::SessionState;
use crate::streaming::net::{TcpServer, WsServer};
use crate::streaming::topics::{self, COMMANDS, SPHERE, TELEMETRY};
use crate::streaming::{run_buffer_node, Body, Broker, CommandKind, Envelope, RecordingMeta, Telemetry};

/// Where the service is reachable once it is up.
#[derive(Debug, Clone)]
pub struct ServeInfo {
    pub robot: String,
    pub dof: usize,
    pub tcp: SocketAddr,
    pub ws: SocketAddr,
    pub broker: Broker,
}

#[derive(Debug, Default)]
pub struct ServeOptions {
    /// Stop after this long; run until `stop` is set otherwise.
    pub duration: Option<Duration>,
    pub stop: Option<Arc<AtomicBool>>,
    pub ready: Option<Sender<ServeInfo>>,
}

#[derive(Debug)]
pub struct ServeSummary {
    pub ik_ticks: u64,
    pub record_ticks: u64,
    pub recordings: Vec<(PathBuf, bool)>,
}

pub fn serve(config: &EngineConfig, options: ServeOptions) -> Result<ServeSummary, PipelineError> {
    let (chain, q0) = robot(config)?;
    let scene = spawn_scene(&config.scene_config()?)?;
    let broker = Broker::new();
    for topic in topics::ALL {
        broker.create_topic(topic).expect("fresh broker");
    }
    let io_err = |addr: &str, source| PipelineError::Io {
        path: addr.to_owned(),
        source,
    };
    let tcp = TcpServer::bind(config.bind.as_str(), broker.clone()).map_err(|e| io_err(&config.bind, e))?;
    let ws = WsServer::bind(config.ws_bind.as_str(), broker.clone()).map_err(|e| io_err(&config.ws_bind, e))?;
    info!(
        "serving robot '{}' with dof {} on tcp {} and ws {}; topics: {}",
        chain.robot_name(),
        chain.dof(),
        tcp.local_addr(),
        ws.local_addr(),
        topics::ALL.join(", ")
    );

    let meta = RecordingMeta::from_chain(&chain, config.record_hz);
    let states = broker.subscribe(topics::STATES, 0).expect("topic exists");
    let dir = config.recordings_dir.clone();
    let buffer = thread::spawn(move || run_buffer_node(states, &dir, &meta));

    let mut spheres = broker.subscribe(SPHERE, broker.end_offset(SPHERE)).expect("topic exists");
    let mut commands = broker.subscribe(COMMANDS, broker.end_offset(COMMANDS)).expect("topic exists");
    let session = SessionState::new(chain.clone(), config.ik, q0)?.with_id_prefix(config.session_prefix.clone());
    let mut engine = Engine::new(session, broker.clone(), config.rates())
        .map_err(crate::config::ConfigError::from)?
        .with_preview_scene(scene)
        .echo_inputs(false);

    if let Some(ready) = &options.ready {
        let _ = ready.send(ServeInfo {
            robot: chain.robot_name().to_owned(),
            dof: chain.dof(),
            tcp: tcp.local_addr(),
            ws: ws.local_addr(),
            broker: broker.clone(),
        });
    }

    let playing = Arc::new(AtomicBool::new(false));
    let stop = options.stop.clone().unwrap_or_default();
    let duration_ms = options.duration.map_or(u64::MAX / 4, |d| d.as_millis() as u64);
    engine.run_realtime(duration_ms, |engine, now| {
        while let Some(msg) = spheres.try_recv() {
            if let Body::Sphere { pose } = msg.body {
                engine.apply(now, &ScriptAction::Sphere { pose });
            }
        }
        while let Some(msg) = commands.try_recv() {
            match &msg.body {
                Body::Command {
                    kind: CommandKind::Replay,
                    file,
                } => start_replay(config, &broker, &playing, file.clone(), now),
                Body::Command { kind, .. } => {
                    if let Some(voice) = kind.voice() {
                        engine.apply(now, &ScriptAction::Command { kind: voice });
                    }
                }
                _ => {}
            }
        }
        !stop.load(Ordering::Relaxed)
    });

    let stats = engine.stats().clone();
    tcp.shutdown();
    ws.shutdown();
    broker.shutdown();
    let recordings = buffer.join().expect("buffer thread")?;
    Ok(ServeSummary {
        ik_ticks: stats.ik_ticks,
        record_ticks: stats.record_ticks,
        recordings,
    })
}

/// Plays `file` (default: the newest finalized recording) on its own thread.
fn start_replay(config: &EngineConfig, broker: &Broker, playing: &Arc<AtomicBool>, file: Option<String>, now: u64) {
    let report_error = |message: String| {
        warn!("{message}");
        let telemetry = Telemetry {
            error: Some(message),
            ..Telemetry::default()
        };
        let _ = broker.publish(TELEMETRY, Envelope::telemetry(TELEMETRY, "", now, telemetry));
    };
    if playing.swap(true, Ordering::SeqCst) {
        report_error("replay ignored: a playback is already running".into());
        return;
    }
    let path = match file.map(PathBuf::from).or_else(|| newest_recording(&config.recordings_dir)) {
        Some(p) => p,
        None => {
            playing.store(false, Ordering::SeqCst);
            report_error("replay ignored: no recording to play".into());
            return;
        }
    };
    let config = config.clone();
    let broker = broker.clone();
    let playing = playing.clone();
    thread::spawn(move || {
        info!("replaying {}", path.display());
        let options = ReplayOptions {
            clock: PlaybackClock::Realtime,
            salvage: false,
            telemetry: Some(broker),
        };
        match replay_file(&config, &path, &options) {
            Ok(outcome) => info!(
                "replay of {} done: stacked {} in {:.2} s",
                path.display(),
                outcome.stacked(),
                outcome.report.duration_s
            ),
            Err(e) => error!("replay of {} failed: {e}", path.display()),
        }
        playing.store(false, Ordering::SeqCst);
    });
}

fn newest_recording(dir: &std::path::Path) -> Option<PathBuf> {
    std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "jsonl"))
        .max_by_key(|e| e.metadata().and_then(|m| m.modified()).ok())
        .map(|e| e.path())
}
