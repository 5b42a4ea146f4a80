//! Rigid transforms and small vector helpers shared by every module.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Proper rigid motion `x ↦ R·x + t` (millimetres).
///
/// Naming convention used throughout the crate: `a_from_b` maps coordinates
/// expressed in frame `b` into frame `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1 (within 1e-9).
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let err = (rotation.transpose() * rotation - Mat3::identity()).amax();
        let det = rotation.determinant();
        if err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "rotation is not proper orthonormal (|RᵀR - I| = {err:.3e}, det = {det:.12})"
            )));
        }
        Ok(RigidTransform { rotation, translation })
    }

    /// Skips the orthonormality check; callers guarantee a proper rotation.
    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform { rotation, translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalised).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        RigidTransform {
            rotation: axis_angle_matrix(axis, angle),
            translation: Vec3::zeros(),
        }
    }

    /// Fixed-axis roll/pitch/yaw in radians: `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64, translation: Vec3) -> Self {
        let r = Rotation3::from_euler_angles(roll, pitch, yaw);
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation vector (axis · angle, radians).
    pub fn rotation_vector(&self) -> Vec3 {
        Rotation3::from_matrix_unchecked(self.rotation).scaled_axis()
    }

    /// Re-orthonormalises the rotation, used after long chains of products.
    pub fn renormalized(&self) -> RigidTransform {
        let r = Rotation3::from_matrix(&self.rotation);
        RigidTransform {
            rotation: *r.matrix(),
            translation: self.translation,
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

pub fn axis_angle_matrix(axis: Vec3, angle: f64) -> Mat3 {
    if axis.norm() == 0.0 || angle == 0.0 {
        return Mat3::identity();
    }
    *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
}

/// Cross-product (skew) matrix `[v]×`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn from_array(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    /// Row-major rotation matrix.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = t.rotation;
        TransformRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: to_array(&t.translation),
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        let m = Mat3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::new(m, from_array(r.translation))
    }
}

/// Human-friendly pose description used in scenario and chain files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    /// Roll, pitch, yaw in degrees (fixed axes, `Rz·Ry·Rx`).
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

impl PoseSpec {
    pub fn to_transform(&self) -> RigidTransform {
        let [r, p, y] = self.rpy_deg.map(f64::to_radians);
        RigidTransform::from_rpy(r, p, y, from_array(self.translation))
    }
}
