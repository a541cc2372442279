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

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use thiserror::Error;

/// Malformed XML.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("URDF parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum UrdfError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid joint '{joint}': {reason}")]
    InvalidJoint { joint: String, reason: String },
    #[error("invalid robot model: {0}")]
    Validation(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "revolute" => Some(JointKind::Revolute),
            "continuous" => Some(JointKind::Continuous),
            "prismatic" => Some(JointKind::Prismatic),
            "fixed" => Some(JointKind::Fixed),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Continuous => "continuous",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        }
    }

    pub fn is_actuated(&self) -> bool {
        !matches!(self, JointKind::Fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

/// One URDF joint element.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub origin_translation: Vector3<f64>,
    /// roll, pitch, yaw (rad)
    pub origin_rotation: Vector3<f64>,
    pub axis: Vector3<f64>,
    /// `None` for continuous and fixed joints.
    pub limits: Option<JointLimits>,
    pub parent_link: String,
    pub child_link: String,
}

impl JointSpec {
    pub fn origin_transform(&self) -> Isometry3<f64> {
        let rpy = self.origin_rotation;
        Isometry3::from_parts(
            Translation3::from(self.origin_translation),
            UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
        )
    }

    pub fn unit_axis(&self) -> Unit<Vector3<f64>> {
        Unit::new_unchecked(self.axis)
    }

    /// Clamp a joint value into limits; unlimited joints pass through.
    pub fn clamp(&self, value: f64) -> f64 {
        match self.limits {
            Some(limits) => limits.clamp(value),
            None => value,
        }
    }
}

/// Links and joints of a URDF robot. The joint graph may branch.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<String>,
    pub joints: Vec<JointSpec>,
}

fn text_pos(doc: &roxmltree::Document, node: roxmltree::Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn parse_vec3(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
    attr: &str,
    joint: &str,
) -> Result<Option<Vector3<f64>>, UrdfError> {
    let Some(raw) = node.attribute(attr) else {
        return Ok(None);
    };
    let values: Result<Vec<f64>, _> = raw.split_whitespace().map(str::parse::<f64>).collect();
    match values {
        Ok(v) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => {
            Ok(Some(Vector3::new(v[0], v[1], v[2])))
        }
        _ => Err(UrdfError::InvalidJoint {
            joint: joint.to_owned(),
            reason: format!(
                "attribute {attr}=\"{raw}\" on line {} is not three finite numbers",
                text_pos(doc, node)
            ),
        }),
    }
}

fn parse_scalar(
    doc: &roxmltree::Document,
    node: roxmltree::Node,
    attr: &str,
    joint: &str,
) -> Result<Option<f64>, UrdfError> {
    match node.attribute(attr) {
        None => Ok(None),
        Some(raw) => match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(UrdfError::InvalidJoint {
                joint: joint.to_owned(),
                reason: format!(
                    "attribute {attr}=\"{raw}\" on line {} is not a finite number",
                    text_pos(doc, node)
                ),
            }),
        },
    }
}

fn child<'a, 'input>(
    node: roxmltree::Node<'a, 'input>,
    tag: &str,
) -> Option<roxmltree::Node<'a, 'input>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_joint(doc: &roxmltree::Document, node: roxmltree::Node) -> Result<JointSpec, UrdfError> {
    let line = text_pos(doc, node);
    let name = node
        .attribute("name")
        .ok_or_else(|| UrdfError::Validation(format!("joint on line {line} has no name")))?
        .to_owned();
    let invalid = |reason: String| UrdfError::InvalidJoint {
        joint: name.clone(),
        reason,
    };

    let kind_raw = node
        .attribute("type")
        .ok_or_else(|| invalid("missing type attribute".into()))?;
    let kind =
        JointKind::parse(kind_raw).ok_or_else(|| invalid(format!("unsupported type '{kind_raw}'")))?;

    let link_ref = |tag: &str| -> Result<String, UrdfError> {
        child(node, tag)
            .and_then(|c| c.attribute("link"))
            .map(str::to_owned)
            .ok_or_else(|| invalid(format!("missing <{tag} link=...>")))
    };
    let parent_link = link_ref("parent")?;
    let child_link = link_ref("child")?;

    let (origin_translation, origin_rotation) = match child(node, "origin") {
        Some(origin) => (
            parse_vec3(doc, origin, "xyz", &name)?.unwrap_or_else(Vector3::zeros),
            parse_vec3(doc, origin, "rpy", &name)?.unwrap_or_else(Vector3::zeros),
        ),
        None => (Vector3::zeros(), Vector3::zeros()),
    };

    let axis = match child(node, "axis") {
        Some(axis) => parse_vec3(doc, axis, "xyz", &name)?.unwrap_or_else(Vector3::x),
        None => Vector3::x(),
    };
    let axis = if kind.is_actuated() {
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(invalid("axis has zero length".into()));
        }
        axis / norm
    } else {
        axis
    };

    let limits = match kind {
        JointKind::Revolute | JointKind::Prismatic => {
            let limit = child(node, "limit")
                .ok_or_else(|| invalid(format!("{} joint has no <limit> element", kind.as_str())))?;
            let lower = parse_scalar(doc, limit, "lower", &name)?.unwrap_or(0.0);
            let upper = parse_scalar(doc, limit, "upper", &name)?.unwrap_or(0.0);
            if lower > upper {
                return Err(invalid(format!("lower limit {lower} exceeds upper limit {upper}")));
            }
            Some(JointLimits { lower, upper })
        }
        JointKind::Continuous | JointKind::Fixed => None,
    };

    for ignored in ["mimic", "dynamics", "safety_controller", "calibration"] {
        if child(node, ignored).is_some() {
            warn!("joint '{name}': <{ignored}> is not supported and will be ignored");
        }
    }

    Ok(JointSpec {
        name,
        kind,
        origin_translation,
        origin_rotation,
        axis,
        limits,
        parent_link,
        child_link,
    })
}

impl RobotModel {
    pub fn from_urdf_str(document: &str) -> Result<Self, UrdfError> {
        let doc = roxmltree::Document::parse(document).map_err(|e| {
            let pos = e.pos();
            ParseError {
                line: pos.row,
                column: pos.col,
                message: e.to_string(),
            }
        })?;
        let root = doc.root_element();
        if root.tag_name().name() != "robot" {
            return Err(UrdfError::Validation(format!(
                "root element is <{}>, expected <robot>",
                root.tag_name().name()
            )));
        }
        let name = root.attribute("name").unwrap_or("robot").to_owned();

        let mut links = Vec::new();
        let mut joints = Vec::new();
        for node in root.children().filter(|n| n.is_element()) {
            match node.tag_name().name() {
                "link" => {
                    let link = node.attribute("name").ok_or_else(|| {
                        UrdfError::Validation(format!(
                            "link on line {} has no name",
                            text_pos(&doc, node)
                        ))
                    })?;
                    links.push(link.to_owned());
                }
                "joint" => joints.push(parse_joint(&doc, node)?),
                _ => {}
            }
        }

        let model = RobotModel {
            name,
            links,
            joints,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_urdf_file(path: impl AsRef<Path>) -> Result<Self, UrdfError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| UrdfError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_urdf_str(&text)
    }

    fn validate(&self) -> Result<(), UrdfError> {
        let mut link_set = HashSet::new();
        for link in &self.links {
            if !link_set.insert(link.as_str()) {
                return Err(UrdfError::Validation(format!("duplicate link '{link}'")));
            }
        }
        let mut joint_names = HashSet::new();
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        for joint in &self.joints {
            if !joint_names.insert(joint.name.as_str()) {
                return Err(UrdfError::Validation(format!("duplicate joint '{}'", joint.name)));
            }
            for link in [&joint.parent_link, &joint.child_link] {
                if !link_set.contains(link.as_str()) {
                    return Err(UrdfError::InvalidJoint {
                        joint: joint.name.clone(),
                        reason: format!("references undefined link '{link}'"),
                    });
                }
            }
            if let Some(previous) = parent_of.insert(&joint.child_link, &joint.name) {
                return Err(UrdfError::Validation(format!(
                    "link '{}' is the child of both '{previous}' and '{}'",
                    joint.child_link, joint.name
                )));
            }
        }
        // every link must reach a root without revisiting itself
        for start in &self.links {
            let mut seen = HashSet::new();
            let mut link = start.as_str();
            while let Some(joint) = self.joint_with_child(link) {
                if !seen.insert(link) {
                    return Err(UrdfError::Validation(format!(
                        "kinematic loop through link '{start}'"
                    )));
                }
                link = joint.parent_link.as_str();
            }
        }
        Ok(())
    }

    pub(crate) fn joint_with_child(&self, link: &str) -> Option<&JointSpec> {
        self.joints.iter().find(|j| j.child_link == link)
    }

    pub fn has_link(&self, link: &str) -> bool {
        self.links.iter().any(|l| l == link)
    }

    pub fn dof(&self) -> usize {
        self.joints.iter().filter(|j| j.kind.is_actuated()).count()
    }

    /// Writes the subset of URDF this crate understands.
    ///
    /// Numbers use Rust's shortest round-trip formatting so a re-parse is exact.
    pub fn to_urdf_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<?xml version=\"1.0\"?>");
        let _ = writeln!(out, "<robot name=\"{}\">", xml_escape(&self.name));
        for link in &self.links {
            let _ = writeln!(out, "  <link name=\"{}\"/>", xml_escape(link));
        }
        for joint in &self.joints {
            let t = joint.origin_translation;
            let r = joint.origin_rotation;
            let _ = writeln!(
                out,
                "  <joint name=\"{}\" type=\"{}\">",
                xml_escape(&joint.name),
                joint.kind.as_str()
            );
            let _ = writeln!(out, "    <parent link=\"{}\"/>", xml_escape(&joint.parent_link));
            let _ = writeln!(out, "    <child link=\"{}\"/>", xml_escape(&joint.child_link));
            let _ = writeln!(
                out,
                "    <origin xyz=\"{:?} {:?} {:?}\" rpy=\"{:?} {:?} {:?}\"/>",
                t.x, t.y, t.z, r.x, r.y, r.z
            );
            let a = joint.axis;
            let _ = writeln!(out, "    <axis xyz=\"{:?} {:?} {:?}\"/>", a.x, a.y, a.z);
            if let Some(limits) = joint.limits {
                let _ = writeln!(
                    out,
                    "    <limit lower=\"{:?}\" upper=\"{:?}\"/>",
                    limits.lower, limits.upper
                );
            }
            let _ = writeln!(out, "  </joint>");
        }
        out.push_str("</robot>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('"', "&quot;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
