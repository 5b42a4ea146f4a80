//! Penalty-based tool–tissue contact synthesised from the distance fields.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::twin::{AnatomyModel, DistanceQuery};
use crate::{Error, Result};

/// Contact and drilling material parameters shared by all structures.
/// Stiffness is per structure and comes from the structure table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// N·s/mm, applied to the inward normal velocity only.
    pub damping: f64,
    /// Surface recession rate per newton above the cut threshold, mm/(N·s).
    pub removal_rate: f64,
    /// Normal force below which the burr does not cut (N).
    pub cut_threshold: f64,
    /// Burr radius (mm).
    pub burr_radius: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            damping: 0.02,
            removal_rate: 0.6,
            cut_threshold: 0.5,
            burr_radius: 1.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self, problems: &mut Vec<String>) {
        if !(self.damping >= 0.0) {
            problems.push(format!("materials.damping must be >= 0, got {}", self.damping));
        }
        if !(self.removal_rate >= 0.0) {
            problems.push(format!(
                "materials.removal_rate must be >= 0, got {}",
                self.removal_rate
            ));
        }
        if !(self.cut_threshold >= 0.0) {
            problems.push(format!(
                "materials.cut_threshold must be >= 0, got {}",
                self.cut_threshold
            ));
        }
        if !(self.burr_radius > 0.0) {
            problems.push(format!("materials.burr_radius must be > 0, got {}", self.burr_radius));
        }
    }
}

/// One penetrated structure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialContact {
    /// Field position (not the label value).
    pub structure: usize,
    pub penetration: f64,
    /// Outward unit normal.
    pub normal: Vec3,
    pub stiffness: f64,
    pub damping: f64,
    /// Normal force magnitude contributed by this structure (N).
    pub force: f64,
    /// The normal came from the last valid one because the gradient vanished.
    pub normal_fallback: bool,
}

/// `k·p + c·max(0, v_in)`, never negative.
pub fn penalty_force(stiffness: f64, damping: f64, penetration: f64, inward_speed: f64) -> f64 {
    if penetration <= 0.0 {
        return 0.0;
    }
    (stiffness * penetration + damping * inward_speed.max(0.0)).max(0.0)
}

/// Penetration of a point with interpolated signed distance `d`.
///
/// Voxel-centre distance fields put the zero crossing on the voxel boundary
/// but report `-(depth + h/2)` past the first interior centre, so half a
/// voxel is subtracted to recover the geometric depth.
pub fn penetration_from_distance(d: f64, half_voxel: f64) -> f64 {
    (-d - half_voxel).max(0.0)
}

/// Per-run contact state: last valid normal per structure and how far the
/// burr has cut into the current surface without a voxel being removed yet.
#[derive(Clone, Debug, Default)]
pub struct ContactModel {
    last_normals: Vec<Option<Vec3>>,
    /// Sub-voxel recession per structure (mm).
    recession: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ContactResult {
    /// Total contact force on the tool, anatomy frame, applied at the tip.
    pub force: Vec3,
    pub contacts: Vec<MaterialContact>,
}

impl ContactResult {
    pub fn magnitude(&self) -> f64 {
        self.force.norm()
    }

    pub fn any_fallback(&self) -> bool {
        self.contacts.iter().any(|c| c.normal_fallback)
    }
}

impl ContactModel {
    pub fn new(structures: usize) -> Self {
        ContactModel {
            last_normals: vec![None; structures],
            recession: vec![0.0; structures],
        }
    }

    pub fn recession(&self, pos: usize) -> f64 {
        self.recession[pos]
    }

    pub(crate) fn recession_mut(&mut self, pos: usize) -> &mut f64 {
        &mut self.recession[pos]
    }

    /// Contact force for a tip at `tip` moving with `velocity` (mm/s), using a
    /// distance query already taken at `tip`.
    pub fn compute(
        &mut self,
        anatomy: &AnatomyModel,
        query: &DistanceQuery,
        velocity: &Vec3,
        materials: &MaterialParams,
    ) -> Result<ContactResult> {
        if !query.clamped_point.iter().chain(velocity.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tip state"));
        }
        let sdf = anatomy.sdf();
        let half_voxel = 0.5 * anatomy.volume().min_spacing();
        let mut out = ContactResult::default();
        for (pos, &d) in query.distances.iter().enumerate() {
            let raw = penetration_from_distance(d, half_voxel);
            let p = raw - self.recession[pos];
            if raw <= 0.0 {
                self.recession[pos] = 0.0;
                continue;
            }
            let (normal, normal_fallback) = match sdf.normal(pos, &query.clamped_point) {
                Some(n) => {
                    self.last_normals[pos] = Some(n);
                    (n, false)
                }
                None => match self.last_normals[pos] {
                    Some(n) => (n, true),
                    None => continue,
                },
            };
            if p <= 0.0 {
                continue;
            }
            let spec = anatomy.spec_at(pos);
            let inward = -velocity.dot(&normal);
            let force = penalty_force(spec.stiffness, materials.damping, p, inward);
            out.force += normal * force;
            out.contacts.push(MaterialContact {
                structure: pos,
                penetration: p,
                normal,
                stiffness: spec.stiffness,
                damping: materials.damping,
                force,
                normal_fallback,
            });
        }
        Ok(out)
    }
}

/// Stateless convenience: contact force at a point, no recession, no normal
/// memory.
pub fn compute_contact_force(
    anatomy: &AnatomyModel,
    tip: &Vec3,
    velocity: &Vec3,
    materials: &MaterialParams,
) -> Result<ContactResult> {
    let mut model = ContactModel::new(anatomy.specs().len());
    model.compute(anatomy, &anatomy.query(tip), velocity, materials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_law() {
        assert!((penalty_force(10.0, 0.0, 0.1, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(penalty_force(10.0, 1.0, 0.0, 5.0), 0.0);
        // Withdrawing does not pull.
        assert!((penalty_force(10.0, 1.0, 0.1, -3.0) - 1.0).abs() < 1e-15);
        assert!((penalty_force(10.0, 1.0, 0.1, 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn penetration_offset() {
        assert_eq!(penetration_from_distance(0.3, 0.125), 0.0);
        assert_eq!(penetration_from_distance(-0.1, 0.125), 0.0);
        assert!((penetration_from_distance(-0.625, 0.125) - 0.5).abs() < 1e-15);
    }
}
