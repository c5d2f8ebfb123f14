//! Kinematic/inertial tree and its JSON model-file format.
//!
//! A model file looks like
//!
//! ```json
//! {
//!   "name": "two_link",
//!   "base_link": "base",
//!   "links": [
//!     {"name": "base", "mass": 1.0, "com": [0, 0, 0], "inertia": [0.01, 0, 0, 0, 0.01, 0, 0, 0, 0.01]},
//!     {"name": "arm",  "mass": 0.5, "com": [0, 0, 0.1], "inertia": [0.002, 0, 0, 0, 0.002, 0, 0, 0, 0.001]}
//!   ],
//!   "joints": [
//!     {"name": "j0", "parent": "base", "child": "arm",
//!      "origin_xyz": [0, 0, 0.05], "origin_rpy": [0, 0, 0], "axis": [0, 1, 0]}
//!   ],
//!   "frames": [
//!     {"name": "left_sole", "link": "base", "origin_xyz": [0, 0, -0.02], "origin_rpy": [0, 0, 0]}
//!   ]
//! }
//! ```
//!
//! Inertias are 3x3 row-major about the link CoM, expressed in the link frame.
//! `origin_rpy` uses the fixed-axis roll/pitch/yaw convention `Rz * Ry * Rx`.

use std::collections::HashMap;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{is_spd, rpy_rotation};

/// Gravity magnitude (m/s^2); gravity acts along -z.
pub const GRAVITY: f64 = 9.81;

const AXIS_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub base_link: String,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub frames: Vec<FrameSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [f64; 9],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub origin_xyz: [f64; 3],
    pub origin_rpy: [f64; 3],
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub name: String,
    pub link: String,
    pub origin_xyz: [f64; 3],
    pub origin_rpy: [f64; 3],
}

/// Rigid transform: rotation and translation of a child frame in its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    /// CoM offset in the link frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the CoM, link-frame axes.
    pub inertia: Matrix3<f64>,
}

/// Revolute joint. The child link frame is the joint frame rotated about `axis`.
#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub origin: Pose,
    pub axis: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub name: String,
    pub link: usize,
    pub offset: Pose,
}

/// Immutable floating-base kinematic tree.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub frames: Vec<Frame>,
    pub base: usize,
    /// Joint that has each link as its child (`None` for the base).
    parent_joint: Vec<Option<usize>>,
    /// Joint indices ordered so that every joint comes after its ancestors.
    joint_order: Vec<usize>,
    /// For each link, the joints on the path from the base (root first).
    support: Vec<Vec<usize>>,
    total_mass: f64,
}

impl RobotModel {
    /// Parse and validate a JSON model file.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelParse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let invalid = |element: &str, reason: String| Error::InvalidModel { element: element.to_string(), reason };

        let mut link_index = HashMap::new();
        let mut links = Vec::with_capacity(file.links.len());
        for spec in &file.links {
            if link_index.insert(spec.name.clone(), links.len()).is_some() {
                return Err(invalid(&spec.name, "duplicate link name".into()));
            }
            let finite = spec.mass.is_finite()
                && spec.com.iter().all(|x| x.is_finite())
                && spec.inertia.iter().all(|x| x.is_finite());
            if !finite {
                return Err(invalid(&spec.name, "non-finite inertial data".into()));
            }
            if spec.mass <= 0.0 {
                return Err(invalid(&spec.name, format!("mass {} is not positive", spec.mass)));
            }
            let inertia = Matrix3::from_row_slice(&spec.inertia);
            let dyn_inertia = DMatrix::from_row_slice(3, 3, &spec.inertia);
            if !is_spd(&dyn_inertia, 1e-9) {
                return Err(invalid(&spec.name, "inertia is not symmetric positive definite".into()));
            }
            links.push(Link {
                name: spec.name.clone(),
                mass: spec.mass,
                com: Vector3::from(spec.com),
                inertia: (inertia + inertia.transpose()) * 0.5,
            });
        }

        let base = *link_index
            .get(&file.base_link)
            .ok_or_else(|| invalid(&file.base_link, "base link is not among the links".into()))?;

        let mut joints = Vec::with_capacity(file.joints.len());
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        let mut joint_names = HashMap::new();
        for spec in &file.joints {
            if joint_names.insert(spec.name.clone(), ()).is_some() {
                return Err(invalid(&spec.name, "duplicate joint name".into()));
            }
            let parent = *link_index
                .get(&spec.parent)
                .ok_or_else(|| invalid(&spec.name, format!("unknown parent link `{}`", spec.parent)))?;
            let child = *link_index
                .get(&spec.child)
                .ok_or_else(|| invalid(&spec.name, format!("unknown child link `{}`", spec.child)))?;
            if parent == child || child == base {
                return Err(Error::Cycle(spec.name.clone()));
            }
            if parent_joint[child].is_some() {
                return Err(invalid(&spec.name, format!("link `{}` already has a parent joint", spec.child)));
            }
            let numbers = spec.origin_xyz.iter().chain(&spec.origin_rpy).chain(&spec.axis);
            if numbers.clone().any(|x| !x.is_finite()) {
                return Err(invalid(&spec.name, "non-finite joint data".into()));
            }
            let axis = Vector3::from(spec.axis);
            let norm = axis.norm();
            if (norm - 1.0).abs() > AXIS_NORM_TOL {
                return Err(invalid(&spec.name, format!("axis norm {norm} is not 1")));
            }
            parent_joint[child] = Some(joints.len());
            joints.push(Joint {
                name: spec.name.clone(),
                parent,
                child,
                origin: Pose {
                    rotation: rpy_rotation(&Vector3::from(spec.origin_rpy)),
                    translation: Vector3::from(spec.origin_xyz),
                },
                axis: axis / norm,
            });
        }

        // Walk every link up to the base; revisiting a link means a cycle.
        let mut support = vec![Vec::new(); links.len()];
        for (l, link) in links.iter().enumerate() {
            let mut path = Vec::new();
            let mut seen = vec![false; links.len()];
            let mut cur = l;
            while cur != base {
                if seen[cur] {
                    return Err(Error::Cycle(links[cur].name.clone()));
                }
                seen[cur] = true;
                match parent_joint[cur] {
                    Some(j) => {
                        path.push(j);
                        cur = joints[j].parent;
                    }
                    None => return Err(invalid(&link.name, "not connected to the base link".into())),
                }
            }
            path.reverse();
            support[l] = path;
        }

        let mut joint_order: Vec<usize> = (0..joints.len()).collect();
        joint_order.sort_by_key(|&j| (support[joints[j].child].len(), j));

        let mut frames = Vec::with_capacity(file.frames.len());
        for spec in &file.frames {
            if link_index.contains_key(&spec.name) || frames.iter().any(|f: &Frame| f.name == spec.name) {
                return Err(invalid(&spec.name, "duplicate frame name".into()));
            }
            let link = *link_index
                .get(&spec.link)
                .ok_or_else(|| invalid(&spec.name, format!("unknown link `{}`", spec.link)))?;
            if spec.origin_xyz.iter().chain(&spec.origin_rpy).any(|x| !x.is_finite()) {
                return Err(invalid(&spec.name, "non-finite frame offset".into()));
            }
            frames.push(Frame {
                name: spec.name.clone(),
                link,
                offset: Pose {
                    rotation: rpy_rotation(&Vector3::from(spec.origin_rpy)),
                    translation: Vector3::from(spec.origin_xyz),
                },
            });
        }

        let total_mass = links.iter().map(|l| l.mass).sum();
        Ok(Self {
            name: file.name.clone(),
            links,
            joints,
            frames,
            base,
            parent_joint,
            joint_order,
            support,
            total_mass,
        })
    }

    /// Number of joints `n`.
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// Size of the generalized velocity, `n + 6`.
    pub fn nv(&self) -> usize {
        self.joints.len() + 6
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    /// Joints in an order where parents precede children.
    pub fn joint_order(&self) -> &[usize] {
        &self.joint_order
    }

    /// Joints on the path from the base to `link`, root first.
    pub fn support(&self, link: usize) -> &[usize] {
        &self.support[link]
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Resolve a named frame or link to `(link, offset)`.
    pub fn frame(&self, name: &str) -> Result<(usize, Pose)> {
        if let Some(f) = self.frames.iter().find(|f| f.name == name) {
            return Ok((f.link, f.offset));
        }
        if let Some(l) = self.link_index(name) {
            return Ok((l, Pose::identity()));
        }
        Err(Error::UnknownFrame(name.to_string()))
    }
}

/// Parse and validate a model file.
pub fn load_model(text: &str) -> Result<RobotModel> {
    RobotModel::from_json_str(text)
}
