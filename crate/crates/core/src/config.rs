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

//! Engine configuration, loaded from JSON or TOML.
//!
//! ```toml
//! urdf = "fixtures/arm_7dof.urdf"
//! base_link = "base_link"
//! tip_link = "wrist_link"
//! ik_hz = 30
//! record_hz = 20
//! bind = "127.0.0.1:7400"
//!
//! [ik]
//! damping = 0.05
//! ```
//!
//! Relative `urdf` and `scene` paths are resolved against the config file's
//! directory; `recordings_dir` is relative to the working directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RateError, Rates};
use crate::fixtures::Fixture;
use crate::ik::{IkError, IkParams};
use crate::kinematics::{ChainError, KinematicChain, RobotModel, UrdfError};
use crate::playback::TrackingMode;
use crate::scene::{SceneConfig, SceneError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error("invalid IK parameters: {0}")]
    Ik(#[from] IkError),
    #[error(transparent)]
    Urdf(#[from] UrdfError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("q_initial has {actual} values, chain has {expected} joints")]
    InitialPose { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Robot description; the bundled 7-DoF arm when unset.
    pub urdf: Option<PathBuf>,
    pub base_link: String,
    pub tip_link: String,
    pub ik: IkParams,
    pub ik_hz: u32,
    pub record_hz: u32,
    /// TCP endpoint (length-prefixed JSON).
    pub bind: String,
    /// WebSocket endpoint for the browser UI.
    pub ws_bind: String,
    /// Scene layout; the default four-cube layout when unset.
    pub scene: Option<PathBuf>,
    /// Start configuration; the fixture home pose or the clamped zero pose
    /// when unset.
    pub q_initial: Option<Vec<f64>>,
    pub tracking: TrackingMode,
    pub session_prefix: String,
    /// Where `serve` writes recordings.
    pub recordings_dir: PathBuf,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let rates = Rates::default();
        EngineConfig {
            urdf: None,
            base_link: "base_link".into(),
            tip_link: "wrist_link".into(),
            ik: IkParams::default(),
            ik_hz: rates.ik_hz,
            record_hz: rates.record_hz,
            bind: "127.0.0.1:7400".into(),
            ws_bind: "127.0.0.1:7401".into(),
            scene: None,
            q_initial: None,
            tracking: TrackingMode::Instant,
            session_prefix: "kt".into(),
            recordings_dir: PathBuf::from("recordings"),
        }
    }
}

impl EngineConfig {
    /// `.toml` files parse as TOML, anything else as JSON.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let read_err = |reason: String| ConfigError::Read {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let mut config: EngineConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| read_err(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?
        };
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        for p in [&mut self.urdf, &mut self.scene].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn rates(&self) -> Rates {
        Rates {
            ik_hz: self.ik_hz,
            record_hz: self.record_hz,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rates().validate()?;
        self.ik.validate()?;
        Ok(())
    }

    pub fn load_model(&self) -> Result<RobotModel, ConfigError> {
        Ok(match &self.urdf {
            Some(path) => RobotModel::from_urdf_file(path)?,
            None => Fixture::Arm7Dof.model(),
        })
    }

    pub fn load_chain(&self) -> Result<Arc<KinematicChain>, ConfigError> {
        Ok(Arc::new(self.load_model()?.extract_chain(&self.base_link, &self.tip_link)?))
    }

    pub fn initial_q(&self, chain: &KinematicChain) -> Result<Vec<f64>, ConfigError> {
        if let Some(q) = &self.q_initial {
            if q.len() != chain.dof() {
                return Err(ConfigError::InitialPose {
                    expected: chain.dof(),
                    actual: q.len(),
                });
            }
            return Ok(q.clone());
        }
        let home = Fixture::ALL
            .into_iter()
            .find(|f| f.robot_name() == chain.robot_name())
            .map(|f| f.home_pose())
            .filter(|q| q.len() == chain.dof());
        Ok(home.unwrap_or_else(|| chain.neutral()))
    }

    pub fn scene_config(&self) -> Result<SceneConfig, ConfigError> {
        Ok(match &self.scene {
            Some(path) => SceneConfig::from_json_file(path)?,
            None => SceneConfig::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EngineConfig::default();
        c.validate().unwrap();
        let chain = c.load_chain().unwrap();
        assert_eq!(chain.dof(), 7);
        assert_eq!(c.initial_q(&chain).unwrap(), Fixture::Arm7Dof.home_pose());
    }

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("e.toml");
        std::fs::write(&toml_path, "ik_hz = 40\nrecord_hz = 10\n[ik]\ndamping = 0.1\n").unwrap();
        let json_path = dir.path().join("e.json");
        std::fs::write(&json_path, r#"{"ik_hz":40,"record_hz":10,"ik":{"damping":0.1}}"#).unwrap();
        let a = EngineConfig::from_file(&toml_path).unwrap();
        let b = EngineConfig::from_file(&json_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ik.damping, 0.1);
        assert_eq!(a.ik.max_iterations, 100);
    }

    #[test]
    fn rates_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        std::fs::write(&path, r#"{"ik_hz":10,"record_hz":20}"#).unwrap();
        assert!(matches!(EngineConfig::from_file(&path), Err(ConfigError::Rates(_))));
        std::fs::write(&path, r#"{"record_hz":0}"#).unwrap();
        assert!(matches!(EngineConfig::from_file(&path), Err(ConfigError::Rates(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        std::fs::write(&path, r#"{"ik_hx":30}"#).unwrap();
        assert!(matches!(EngineConfig::from_file(&path), Err(ConfigError::Read { .. })));
    }
}
