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

//! End-to-end runs: scripted teaching into a trajectory file, and replay of
//! a file against the simulated controller and scene.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use log::warn;
use thiserror::Error;

use crate::config::{ConfigError, EngineConfig};
use crate::engine::{perfect_stacking_script, perturb_script, Demonstration, Engine, RunStats, ScriptEvent, StackingPlan};
use crate::kinematics::{forward_kinematics, KinematicChain};
use crate::metrics::{session_report, MetricsError, SessionRecord};
use crate::playback::{load_trajectory, play, LoadedTrajectory, PlaybackClock, PlaybackError, PlaybackOptions, PlaybackReport, SimController};
use crate::scene::{spawn_scene, SceneError};
use crate::session::{SessionError, SessionState};
use crate::streaming::topics::STATES;
use crate::streaming::{consume_session_with, Broker, BufferError, RecordingMeta};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("recording failed: {0}")]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Playback(#[from] PlaybackError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("script never started a recording")]
    NoSession,
    #[error("cannot create {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    /// virtual clock, as fast as the CPU allows
    #[default]
    Fast,
    Realtime,
}

#[derive(Debug)]
pub struct TeachOutcome {
    pub file: PathBuf,
    pub session_id: String,
    pub states: u64,
    pub finalized: bool,
    pub stats: RunStats,
    pub demonstrations: Vec<Demonstration>,
}

/// The configured robot and its start pose.
pub fn robot(config: &EngineConfig) -> Result<(Arc<KinematicChain>, Vec<f64>), PipelineError> {
    config.validate()?;
    let chain = config.load_chain()?;
    let q0 = config.initial_q(&chain)?;
    Ok((chain, q0))
}

/// Runs `script` through session, broker and buffer, writing the first
/// recorded session to `out`.
pub fn teach_scripted(
    config: &EngineConfig,
    script: &[ScriptEvent],
    out: &Path,
    clock: Clock,
) -> Result<TeachOutcome, PipelineError> {
    let (chain, q0) = robot(config)?;
    let session = SessionState::new(chain.clone(), config.ik, q0)?.with_id_prefix(config.session_prefix.clone());
    let broker = Broker::new();
    let meta = RecordingMeta::from_chain(&chain, config.record_hz);
    let mut sub = broker.subscribe(STATES, 0).map_err(BufferError::from)?;
    let path = out.to_path_buf();
    let buffer = thread::spawn(move || {
        consume_session_with(&mut sub, &meta, |_| File::create(&path).map(BufWriter::new))
    });

    let mut engine = Engine::new(session, broker.clone(), config.rates()).map_err(ConfigError::from)?;
    match clock {
        Clock::Fast => engine.run_virtual(script, None),
        Clock::Realtime => engine.run_script_realtime(script, None),
    };
    // ends the buffer if the script never stopped
    broker.shutdown();
    let outcome = buffer.join().expect("buffer thread")?;
    let stats = engine.stats().clone();
    let demonstrations = engine.take_demonstrations();
    let header = outcome.header.ok_or(PipelineError::NoSession)?;
    if !outcome.finalized {
        warn!(
            "session {} never stopped; {} left unfinalized",
            header.session_id,
            out.display()
        );
    }
    if demonstrations.len() > 1 {
        warn!("script recorded {} sessions; only the first was written", demonstrations.len());
    }
    Ok(TeachOutcome {
        file: out.to_path_buf(),
        session_id: header.session_id,
        states: outcome.count,
        finalized: outcome.finalized,
        stats,
        demonstrations,
    })
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub loaded: LoadedTrajectory,
    pub report: PlaybackReport,
    pub record: SessionRecord,
}

impl ReplayOutcome {
    pub fn stacked(&self) -> usize {
        self.record.cubes_stacked
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    pub clock: PlaybackClock,
    pub salvage: bool,
    pub telemetry: Option<Broker>,
}

/// Replays `file` against the configured robot and a fresh scene. The
/// controller starts at the first recorded configuration.
pub fn replay_file(config: &EngineConfig, file: &Path, options: &ReplayOptions) -> Result<ReplayOutcome, PipelineError> {
    let (chain, _) = robot(config)?;
    let loaded = load_trajectory(file, Some(&chain), options.salvage)?;
    let mut scene = spawn_scene(&config.scene_config()?)?;
    let first = loaded.trajectory.states[0].q.clone();
    let mut controller = SimController::new(chain, first, config.tracking)?;
    let playback_options = PlaybackOptions {
        clock: options.clock,
        telemetry: options.telemetry.clone(),
    };
    let report = play(&loaded.trajectory, &mut controller, Some(&mut scene), &playback_options)?;
    let record = if loaded.finalized {
        session_report(&loaded, &report, &scene)?
    } else {
        SessionRecord {
            session_id: loaded.trajectory.session_id.clone(),
            subject_id: None,
            condition: None,
            duration_s: loaded.trajectory.duration_ms() as f64 / 1000.0,
            states: loaded.trajectory.states.len(),
            cubes_stacked: scene.count_stacked()?,
        }
    };
    Ok(ReplayOutcome { loaded, report, record })
}

/// Perfect-stacking demonstration for the configured robot and scene,
/// starting from the robot's start pose.
pub fn stacking_script(config: &EngineConfig, plan: &StackingPlan) -> Result<Vec<ScriptEvent>, PipelineError> {
    let (chain, q0) = robot(config)?;
    let start = forward_kinematics(&chain, &q0).expect("start pose matches chain");
    Ok(perfect_stacking_script(&start, &config.scene_config()?, plan))
}

/// Teach a stacking demonstration with sphere noise `sigma_m`, replay it,
/// and count the stacked cubes.
pub fn noisy_stacking_trial(
    config: &EngineConfig,
    sigma_m: f64,
    seed: u64,
    dir: &Path,
) -> Result<ReplayOutcome, PipelineError> {
    let script = perturb_script(&stacking_script(config, &StackingPlan::default())?, sigma_m, seed);
    let out = dir.join(format!("stacking_sigma{:.0}mm_seed{seed}.jsonl", sigma_m * 1000.0));
    teach_scripted(config, &script, &out, Clock::Fast)?;
    replay_file(config, &out, &ReplayOptions::default())
}
