use super::sdf::{build_sdf_with, structure_field, DistanceQuery, SdfSet};
use super::volume::{validate_specs, LabeledVolume, StructureSpec};
use crate::exec::Execution;
use crate::geometry::Vec3;
use crate::{Error, Result};

/// The digital twin: labeled anatomy plus one distance field per structure.
#[derive(Clone, Debug)]
pub struct AnatomyModel {
    volume: LabeledVolume,
    specs: Vec<StructureSpec>,
    sdf: SdfSet,
    exec: Execution,
}

/// What a carve request did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CarveOutcome {
    pub removed: usize,
    /// `(structure index, voxels removed)` for every structure that lost voxels.
    pub removed_by_structure: Vec<(u8, usize)>,
    /// Critical voxels inside the burr that were left in place.
    pub critical_touched: usize,
    /// The burr only reached critical structures: nothing was removed and the
    /// request counts as a simulated injury.
    pub breach: bool,
}

impl AnatomyModel {
    pub fn new(volume: LabeledVolume, specs: Vec<StructureSpec>) -> Result<Self> {
        Self::with_execution(volume, specs, Execution::default())
    }

    pub fn with_execution(volume: LabeledVolume, specs: Vec<StructureSpec>, exec: Execution) -> Result<Self> {
        validate_specs(&specs)?;
        let sdf = build_sdf_with(&volume, &specs, exec)?;
        Ok(AnatomyModel {
            volume,
            specs,
            sdf,
            exec,
        })
    }

    pub fn volume(&self) -> &LabeledVolume {
        &self.volume
    }

    pub fn specs(&self) -> &[StructureSpec] {
        &self.specs
    }

    pub fn sdf(&self) -> &SdfSet {
        &self.sdf
    }

    /// Spec at field position `pos` (fields follow the spec order).
    pub fn spec_at(&self, pos: usize) -> &StructureSpec {
        &self.specs[pos]
    }

    pub fn spec_by_index(&self, index: u8) -> Option<&StructureSpec> {
        self.specs.iter().find(|s| s.index == index)
    }

    pub fn query(&self, tip: &Vec3) -> DistanceQuery {
        self.sdf.query(tip)
    }

    /// Removes non-critical voxels whose centre lies within `burr_radius` of
    /// `tip` and recomputes the fields of every structure that changed.
    pub fn carve(&mut self, tip: &Vec3, burr_radius: f64) -> Result<CarveOutcome> {
        if !(burr_radius > 0.0) || !burr_radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "burr radius must be > 0, got {burr_radius}"
            )));
        }
        if !tip.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("carve tip"));
        }
        let dims = self.volume.dims();
        let spacing = self.volume.spacing();
        let origin = self.volume.origin();
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let lo = ((tip[a] - burr_radius - origin[a]) / spacing[a]).ceil();
            let hi = ((tip[a] + burr_radius - origin[a]) / spacing[a]).floor();
            if hi < 0.0 || lo > (dims[a] - 1) as f64 || lo > hi {
                return Ok(CarveOutcome::default());
            }
            range[a] = (lo.max(0.0) as usize, hi.min((dims[a] - 1) as f64) as usize);
        }

        let mut critical = [false; 256];
        for s in &self.specs {
            critical[s.index as usize] = s.critical;
        }
        let r2 = burr_radius * burr_radius;
        let mut removed_counts = [0usize; 256];
        let mut outcome = CarveOutcome::default();
        let mut hits = Vec::new();
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    if (self.volume.voxel_center(i, j, k) - tip).norm_squared() > r2 {
                        continue;
                    }
                    let idx = self.volume.linear_index(i, j, k);
                    let l = self.volume.labels()[idx];
                    if l == 0 {
                        continue;
                    }
                    if critical[l as usize] {
                        outcome.critical_touched += 1;
                    } else {
                        hits.push(idx);
                        removed_counts[l as usize] += 1;
                    }
                }
            }
        }
        if hits.is_empty() {
            outcome.breach = outcome.critical_touched > 0;
            return Ok(outcome);
        }
        let labels = self.volume.labels_mut();
        for &idx in &hits {
            labels[idx] = 0;
        }
        outcome.removed = hits.len();
        for (pos, spec) in self.specs.iter().enumerate() {
            let n = removed_counts[spec.index as usize];
            if n > 0 {
                outcome.removed_by_structure.push((spec.index, n));
                let field = structure_field(&self.volume, spec, self.exec);
                self.sdf.replace_field(pos, field);
            }
        }
        Ok(outcome)
    }
}
