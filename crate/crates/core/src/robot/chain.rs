//! Serial kinematic chains: forward kinematics and the geometric Jacobian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::admittance::GainMatrix;
use crate::geometry::{axis_angle_matrix, from_array, PoseSpec, RigidTransform, Vec3};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// One joint: a fixed transform from the previous frame, then motion about or
/// along `axis` (expressed in the joint frame).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    #[serde(default)]
    pub origin: PoseSpec,
    pub axis: [f64; 3],
    /// Radians for revolute joints, millimetres for prismatic ones.
    pub lower: f64,
    pub upper: f64,
}

/// Chain definition file contents (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub joints: Vec<Joint>,
    /// Last joint frame to drill tip, normally from pivot calibration.
    pub tip: PoseSpec,
    /// Diagonal admittance gains (3 translational, 3 rotational).
    pub gains: [f64; 6],
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    origins: Vec<RigidTransform>,
    axes: Vec<Vec3>,
    tip: RigidTransform,
    gains: GainMatrix,
    spec: ChainSpec,
}

impl KinematicChain {
    pub fn from_spec(spec: ChainSpec) -> Result<Self> {
        let mut problems = Vec::new();
        if spec.joints.len() < 3 {
            problems.push(format!("chain needs at least 3 joints, has {}", spec.joints.len()));
        }
        for j in &spec.joints {
            if !(j.lower < j.upper) {
                problems.push(format!("joint '{}': lower limit must be below upper", j.name));
            }
            if from_array(j.axis).norm() < 1e-12 {
                problems.push(format!("joint '{}': zero axis", j.name));
            }
        }
        if spec.gains.iter().any(|g| !(*g > 0.0)) {
            problems.push("all admittance gains must be > 0".into());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let origins = spec.joints.iter().map(|j| j.origin.to_transform()).collect();
        let axes = spec.joints.iter().map(|j| from_array(j.axis).normalize()).collect();
        Ok(KinematicChain {
            joints: spec.joints.clone(),
            origins,
            axes,
            tip: spec.tip.to_transform(),
            gains: GainMatrix::new(spec.gains)?,
            spec,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    /// Generic 6-DOF arm: a Cartesian XYZ stage followed by a roll/pitch/yaw
    /// wrist carrying the drill.
    ///
    /// | joint | kind      | axis | origin (mm)   | limits        |
    /// |-------|-----------|------|---------------|---------------|
    /// | x     | prismatic | x    | 0             | ±150 mm       |
    /// | y     | prismatic | y    | 0             | ±150 mm       |
    /// | z     | prismatic | z    | 0             | ±150 mm       |
    /// | roll  | revolute  | x    | (0, 0, 200)   | ±2.5 rad      |
    /// | pitch | revolute  | y    | (0, 0, -60)   | ±2.5 rad      |
    /// | yaw   | revolute  | z    | (0, 0, -80)   | ±2.5 rad      |
    /// | tip   |           |      | (0, 0, -120)  |               |
    ///
    /// With `q = 0` the tip sits at `(0, 0, -60)` in the base frame with the
    /// identity orientation. Gains: 4 mm·s⁻¹·N⁻¹ translational and 1e-4
    /// rad·s⁻¹·(N·mm)⁻¹ rotational.
    pub fn default_spec() -> ChainSpec {
        let p = |name: &str, axis: [f64; 3]| Joint {
            name: name.into(),
            kind: JointKind::Prismatic,
            origin: PoseSpec::default(),
            axis,
            lower: -150.0,
            upper: 150.0,
        };
        let r = |name: &str, axis: [f64; 3], z: f64| Joint {
            name: name.into(),
            kind: JointKind::Revolute,
            origin: PoseSpec {
                translation: [0.0, 0.0, z],
                rpy_deg: [0.0; 3],
            },
            axis,
            lower: -2.5,
            upper: 2.5,
        };
        ChainSpec {
            joints: vec![
                p("x", [1.0, 0.0, 0.0]),
                p("y", [0.0, 1.0, 0.0]),
                p("z", [0.0, 0.0, 1.0]),
                r("roll", [1.0, 0.0, 0.0], 200.0),
                r("pitch", [0.0, 1.0, 0.0], -60.0),
                r("yaw", [0.0, 0.0, 1.0], -80.0),
            ],
            tip: PoseSpec {
                translation: [0.0, 0.0, -120.0],
                rpy_deg: [0.0; 3],
            },
            gains: [4.0, 4.0, 4.0, 1e-4, 1e-4, 1e-4],
        }
    }

    pub fn default_arm() -> Self {
        Self::from_spec(Self::default_spec()).expect("default chain is valid")
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn gains(&self) -> &GainMatrix {
        &self.gains
    }

    pub fn tip_transform(&self) -> &RigidTransform {
        &self.tip
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && self.joints.iter().zip(q).all(|(j, v)| *v >= j.lower && *v <= j.upper)
    }

    fn check(&self, q: &[f64]) {
        assert_eq!(q.len(), self.dof(), "joint vector length does not match the chain");
    }

    /// Joint frames after each joint's fixed origin (before its motion), and
    /// the tip pose, all in the base frame.
    fn frames(&self, q: &[f64]) -> (Vec<RigidTransform>, RigidTransform) {
        self.check(q);
        let mut t = RigidTransform::identity();
        let mut frames = Vec::with_capacity(self.dof());
        for ((joint, origin), (axis, &qi)) in self.joints.iter().zip(&self.origins).zip(self.axes.iter().zip(q)) {
            t = t.compose(origin);
            frames.push(t);
            let motion = match joint.kind {
                JointKind::Revolute => {
                    RigidTransform::from_parts_unchecked(axis_angle_matrix(*axis, qi), Vec3::zeros())
                }
                JointKind::Prismatic => RigidTransform::from_translation(axis * qi),
            };
            t = t.compose(&motion);
        }
        (frames, t.compose(&self.tip))
    }

    /// Tip pose in the robot base frame.
    pub fn forward_kinematics(&self, q: &[f64]) -> RigidTransform {
        self.frames(q).1
    }

    /// Geometric Jacobian (6 × m): rows 0–2 map joint rates to the tip's
    /// linear velocity (mm/s), rows 3–5 to its angular velocity (rad/s), both
    /// in the base frame.
    pub fn jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let (frames, tip) = self.frames(q);
        let p_tip = tip.translation();
        let mut j = DMatrix::zeros(6, self.dof());
        for (c, (frame, joint)) in frames.iter().zip(&self.joints).enumerate() {
            let a = frame.transform_vector(&self.axes[c]);
            match joint.kind {
                JointKind::Revolute => {
                    let lin = a.cross(&(p_tip - frame.translation()));
                    j.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
                    j.fixed_view_mut::<3, 1>(3, c).copy_from(&a);
                }
                JointKind::Prismatic => {
                    j.fixed_view_mut::<3, 1>(0, c).copy_from(&a);
                }
            }
        }
        j
    }
}
