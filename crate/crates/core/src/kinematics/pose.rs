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

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Position (m) plus unit-quaternion orientation.
///
/// On the wire the orientation is written `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_position(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        // renormalize to absorb drift from long products
        let orientation = UnitQuaternion::new_normalize(*iso.rotation.quaternion());
        Pose::new(iso.translation.vector, orientation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }

    /// `[w, x, y, z]`
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn with_position(mut self, position: Vector3<f64>) -> Self {
        self.position = position;
        self
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let [w, x, y, z] = repr.orientation;
        let quat = Quaternion::new(w, x, y, z);
        if quat.norm() == 0.0 {
            return Err(serde::de::Error::custom("zero-norm orientation quaternion"));
        }
        Ok(Pose::new(
            Vector3::from(repr.position),
            UnitQuaternion::new_normalize(quat),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_order_is_wxyz() {
        let pose = Pose::new(
            Vector3::new(1.0, 2.0, 3.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI),
        );
        let json = serde_json::to_value(pose).unwrap();
        let o = json["orientation"].as_array().unwrap();
        assert!(o[0].as_f64().unwrap().abs() < 1e-12);
        assert!((o[3].as_f64().unwrap() - 1.0).abs() < 1e-12);
        let back: Pose = serde_json::from_value(json).unwrap();
        assert!((back.orientation.angle_to(&pose.orientation)).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_input_is_normalized() {
        let pose: Pose =
            serde_json::from_str(r#"{"position":[0,0,0],"orientation":[2,0,0,0]}"#).unwrap();
        assert!((pose.orientation.quaternion().norm() - 1.0).abs() < 1e-12);
        assert!(serde_json::from_str::<Pose>(r#"{"position":[0,0,0],"orientation":[0,0,0,0]}"#)
            .is_err());
    }
}
