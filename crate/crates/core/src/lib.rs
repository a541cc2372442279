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

//! Kinesthetic-teaching engine: URDF kinematics, IK servoing, session
//! recording, topic streaming, playback and stacking evaluation.

pub mod cli;
pub mod config;
pub mod engine;
pub mod fixtures;
pub mod ik;
pub mod kinematics;
pub mod metrics;
pub mod pipeline;
pub mod playback;
pub mod scene;
pub mod server;
pub mod session;
pub mod streaming;
