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

//! Command-line front end for the `kt` binary.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use crate::config::EngineConfig;
use crate::engine::{load_script, perturb_script, StackingPlan};
use crate::metrics::{append_record, evaluate, read_records, EvalMode};
use crate::pipeline::{replay_file, stacking_script, teach_scripted, Clock, PipelineError, ReplayOptions};
use crate::playback::PlaybackClock;
use crate::server::{serve, ServeOptions};

#[derive(Debug, Parser)]
#[command(name = "kt", version, about = "Kinesthetic-teaching engine")]
pub struct Cli {
    /// Engine config (JSON, or TOML by extension)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Robot URDF; overrides the config
    #[arg(long, global = true)]
    pub urdf: Option<PathBuf>,
    /// Scene config JSON; overrides the config
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the engine service with its TCP and WebSocket endpoints
    Serve(ServeArgs),
    /// Drive a scripted teaching session into a trajectory file
    Teach(TeachArgs),
    /// Replay a trajectory file against the simulated robot and scene
    Replay(ReplayArgs),
    /// Summarize a results log
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TCP bind address; overrides the config
    #[arg(long)]
    pub bind: Option<String>,
    /// WebSocket bind address; overrides the config
    #[arg(long)]
    pub ws_bind: Option<String>,
    /// Exit after this many seconds
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    /// Script (JSON Lines); the generated perfect-stacking script if omitted
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Trajectory file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Run on the wall clock instead of the virtual clock
    #[arg(long)]
    pub realtime: bool,
    /// Seed for the sphere noise
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of sphere position noise, mm
    #[arg(long, default_value_t = 0.0)]
    pub noise_mm: f64,
    /// Skip replaying the recording after teaching
    #[arg(long)]
    pub no_replay: bool,
    #[command(flatten)]
    pub results: ResultArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trajectory file
    pub file: PathBuf,
    /// Issue commands on the wall clock
    #[arg(long)]
    pub realtime: bool,
    /// Accept a file without footer
    #[arg(long)]
    pub salvage: bool,
    #[command(flatten)]
    pub results: ResultArgs,
}

#[derive(Debug, Args)]
pub struct ResultArgs {
    /// Append the session record to this results log
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long, requires = "results")]
    pub subject: Option<String>,
    #[arg(long, requires = "results")]
    pub condition: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Histogram,
    Paired,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Results log (JSON Lines)
    pub results: PathBuf,
    #[arg(long, value_enum, default_value = "histogram")]
    pub mode: ModeArg,
    /// Significance level: 0.05 or 0.01
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

impl Cli {
    fn engine_config(&self) -> Result<EngineConfig, PipelineError> {
        let mut config = match &self.config {
            Some(path) => EngineConfig::from_file(path)?,
            None => EngineConfig::default(),
        };
        if let Some(urdf) = &self.urdf {
            config.urdf = Some(urdf.clone());
        }
        if let Some(scene) = &self.scene {
            config.scene = Some(scene.clone());
        }
        Ok(config)
    }
}

fn record_result(args: &ResultArgs, record: &crate::metrics::SessionRecord) -> Result<(), PipelineError> {
    if let Some(path) = &args.results {
        let mut record = record.clone();
        record.subject_id = args.subject.clone();
        record.condition = args.condition.clone();
        append_record(path, &record)?;
        info!("appended result to {}", path.display());
    }
    Ok(())
}

/// Runs a parsed command line; the text printed on stdout is the report.
pub fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut config = cli.engine_config()?;
    match &cli.command {
        Command::Serve(args) => {
            if let Some(bind) = &args.bind {
                config.bind = bind.clone();
            }
            if let Some(ws) = &args.ws_bind {
                config.ws_bind = ws.clone();
            }
            let options = ServeOptions {
                duration: args.duration_s.map(Duration::from_secs_f64),
                ..ServeOptions::default()
            };
            let summary = serve(&config, options)?;
            println!(
                "ik ticks: {}\nrecord ticks: {}\nrecordings: {}",
                summary.ik_ticks,
                summary.record_ticks,
                summary.recordings.len()
            );
        }
        Command::Teach(args) => {
            let script = match &args.script {
                Some(path) => load_script(path).map_err(|e| PipelineError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                })?,
                None => stacking_script(&config, &StackingPlan::default())?,
            };
            let script = perturb_script(&script, args.noise_mm / 1000.0, args.seed);
            let clock = if args.realtime { Clock::Realtime } else { Clock::Fast };
            let taught = teach_scripted(&config, &script, &args.out, clock)?;
            println!("session: {}", taught.session_id);
            println!("file: {}", taught.file.display());
            println!("states: {}", taught.states);
            println!("finalized: {}", taught.finalized);
            if !taught.finalized {
                eprintln!("warning: session never stopped; file has no footer");
            }
            for e in &taught.stats.errors {
                eprintln!("warning: {e}");
            }
            if !args.no_replay {
                let options = ReplayOptions {
                    salvage: !taught.finalized,
                    ..ReplayOptions::default()
                };
                let replayed = replay_file(&config, &args.out, &options)?;
                println!("duration: {:.2} s", replayed.record.duration_s);
                println!("stacked: {}", replayed.stacked());
                record_result(&args.results, &replayed.record)?;
            }
        }
        Command::Replay(args) => {
            let options = ReplayOptions {
                clock: if args.realtime {
                    PlaybackClock::Realtime
                } else {
                    PlaybackClock::Virtual
                },
                salvage: args.salvage,
                telemetry: None,
            };
            let replayed = replay_file(&config, &args.file, &options)?;
            println!("session: {}", replayed.record.session_id);
            println!("states: {}", replayed.record.states);
            println!("duration: {:.2} s", replayed.report.duration_s);
            println!("faults: {}", replayed.report.faults().count());
            println!("stacked: {}", replayed.stacked());
            record_result(&args.results, &replayed.record)?;
        }
        Command::Eval(args) => {
            let records = read_records(&args.results)?;
            let mode = match args.mode {
                ModeArg::Histogram => EvalMode::Histogram,
                ModeArg::Paired => EvalMode::Paired,
            };
            print!("{}", evaluate(&records, mode, args.alpha)?);
        }
    }
    Ok(())
}

/// Entry point of the `kt` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
