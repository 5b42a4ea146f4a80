//! Per-structure signed distance fields and tip distance queries.
//!
//! Values are sampled at voxel centres. Outside a structure the value is the
//! distance to the nearest voxel centre of that structure; inside it is minus
//! the distance to the nearest voxel centre not belonging to it. The zero level
//! of the interpolated field therefore sits on the voxel boundary, while values
//! away from the boundary overstate the true surface distance by up to half a
//! voxel (the membership-based sign is kept deliberately, see
//! [`crate::interaction::contact`] for how penetration compensates).

use log::warn;

use super::edt::squared_edt;
use super::volume::{LabeledVolume, StructureSpec};
use crate::exec::{self, Execution};
use crate::geometry::Vec3;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct SdfField {
    pub index: u8,
    pub critical: bool,
    values: Vec<f64>,
    absent: bool,
}

impl SdfField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the structure has no labeled voxels; every value is +∞.
    pub fn is_absent(&self) -> bool {
        self.absent
    }
}

/// One signed distance field per structure, on the grid of the source volume.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfSet {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    fields: Vec<SdfField>,
}

/// Result of [`SdfSet::query`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceQuery {
    /// `d_n` per field, in field order (mm).
    pub distances: Vec<f64>,
    /// Field position of the nearest structure after tie-breaking.
    pub nearest: Option<usize>,
    pub d_min: f64,
    /// The tip was outside the grid and has been clamped onto it.
    pub out_of_bounds: bool,
    pub clamped_point: Vec3,
}

pub fn build_sdf(volume: &LabeledVolume, specs: &[StructureSpec]) -> Result<SdfSet> {
    build_sdf_with(volume, specs, Execution::default())
}

pub fn build_sdf_with(volume: &LabeledVolume, specs: &[StructureSpec], exec: Execution) -> Result<SdfSet> {
    volume.check_labels(specs)?;
    let fields = specs.iter().map(|s| structure_field(volume, s, exec)).collect();
    Ok(SdfSet {
        dims: volume.dims(),
        spacing: volume.spacing(),
        origin: volume.origin(),
        fields,
    })
}

pub(crate) fn structure_field(volume: &LabeledVolume, spec: &StructureSpec, exec: Execution) -> SdfField {
    let labels = volume.labels();
    let inside: Vec<bool> = labels.iter().map(|&l| l == spec.index).collect();
    if !inside.iter().any(|&b| b) {
        warn!("structure {} ({}) has no labeled voxels", spec.index, spec.name);
        return SdfField {
            index: spec.index,
            critical: spec.critical,
            values: vec![f64::INFINITY; labels.len()],
            absent: true,
        };
    }
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    let to_structure = squared_edt(&inside, volume.dims(), volume.spacing(), exec);
    let to_exterior = squared_edt(&outside, volume.dims(), volume.spacing(), exec);
    let mut values = vec![0.0; labels.len()];
    exec::for_each_chunk_mut(exec, &mut values, volume.dims()[0], |row, chunk| {
        let base = row * chunk.len();
        for (o, v) in chunk.iter_mut().enumerate() {
            let idx = base + o;
            *v = if inside[idx] {
                -to_exterior[idx].sqrt()
            } else {
                to_structure[idx].sqrt()
            };
        }
    });
    SdfField {
        index: spec.index,
        critical: spec.critical,
        values,
        absent: false,
    }
}

impl SdfSet {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn fields(&self) -> &[SdfField] {
        &self.fields
    }

    pub fn field(&self, pos: usize) -> &SdfField {
        &self.fields[pos]
    }

    pub fn position_of(&self, index: u8) -> Option<usize> {
        self.fields.iter().position(|f| f.index == index)
    }

    /// Structure indices whose fields are absent.
    pub fn absent(&self) -> Vec<u8> {
        self.fields.iter().filter(|f| f.absent).map(|f| f.index).collect()
    }

    pub(crate) fn replace_field(&mut self, pos: usize, field: SdfField) {
        self.fields[pos] = field;
    }

    pub fn node_value(&self, pos: usize, i: usize, j: usize, k: usize) -> f64 {
        let [nx, ny, _] = self.dims;
        self.fields[pos].values[i + nx * (j + ny * k)]
    }

    /// Clamps `p` onto the grid box; returns the clamped point and whether it
    /// moved.
    pub fn clamp(&self, p: &Vec3) -> (Vec3, bool) {
        let mut q = *p;
        let mut moved = false;
        for a in 0..3 {
            let lo = self.origin[a];
            let hi = self.origin[a] + (self.dims[a] - 1) as f64 * self.spacing[a];
            if q[a] < lo {
                q[a] = lo;
                moved = true;
            } else if q[a] > hi {
                q[a] = hi;
                moved = true;
            } else if q[a].is_nan() {
                q[a] = lo;
                moved = true;
            }
        }
        (q, moved)
    }

    /// Trilinear interpolation of one field at `p` (clamped onto the grid).
    pub fn sample(&self, pos: usize, p: &Vec3) -> f64 {
        let field = &self.fields[pos];
        if field.absent {
            return f64::INFINITY;
        }
        let (p, _) = self.clamp(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.spacing[a];
            if self.dims[a] == 1 {
                continue;
            }
            let i0 = (u.floor() as isize).clamp(0, self.dims[a] as isize - 2) as usize;
            base[a] = i0;
            frac[a] = (u - i0 as f64).clamp(0.0, 1.0);
        }
        let [nx, ny, _] = self.dims;
        let step = |a: usize| if self.dims[a] > 1 { 1 } else { 0 };
        let (sx, sy, sz) = (step(0), step(1), step(2));
        let at = |di: usize, dj: usize, dk: usize| {
            field.values[(base[0] + di) + nx * ((base[1] + dj) + ny * (base[2] + dk))]
        };
        let lerp = |a: f64, b: f64, t: f64| {
            if t == 0.0 {
                a
            } else if t == 1.0 {
                b
            } else {
                a + (b - a) * t
            }
        };
        let c00 = lerp(at(0, 0, 0), at(sx, 0, 0), frac[0]);
        let c10 = lerp(at(0, sy, 0), at(sx, sy, 0), frac[0]);
        let c01 = lerp(at(0, 0, sz), at(sx, 0, sz), frac[0]);
        let c11 = lerp(at(0, sy, sz), at(sx, sy, sz), frac[0]);
        let c0 = lerp(c00, c10, frac[1]);
        let c1 = lerp(c01, c11, frac[1]);
        lerp(c0, c1, frac[2])
    }

    /// Central-difference gradient of the interpolated field.
    pub fn gradient(&self, pos: usize, p: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let h = 0.25 * self.spacing[a];
            let mut lo = *p;
            let mut hi = *p;
            lo[a] -= h;
            hi[a] += h;
            g[a] = (self.sample(pos, &hi) - self.sample(pos, &lo)) / (2.0 * h);
        }
        g
    }

    /// Outward unit normal of a structure at `p`, if the gradient is usable.
    pub fn normal(&self, pos: usize, p: &Vec3) -> Option<Vec3> {
        let g = self.gradient(pos, p);
        let n = g.norm();
        (n.is_finite() && n > 1e-9).then(|| g / n)
    }

    /// Interpolated distance to every structure plus the nearest one.
    ///
    /// Ties on distance prefer critical structures, then the lower index.
    pub fn query(&self, tip: &Vec3) -> DistanceQuery {
        let (p, out_of_bounds) = self.clamp(tip);
        let distances: Vec<f64> = (0..self.fields.len()).map(|i| self.sample(i, &p)).collect();
        let nearest = nearest_structure(&distances, |i| (self.fields[i].critical, self.fields[i].index));
        let d_min = nearest.map(|i| distances[i]).unwrap_or(f64::INFINITY);
        DistanceQuery {
            distances,
            nearest,
            d_min,
            out_of_bounds,
            clamped_point: p,
        }
    }

    /// Evaluates every field at every voxel centre; used by tests and tools.
    pub fn values_at(&self, pos: usize) -> &[f64] {
        &self.fields[pos].values
    }

    pub fn rebuild_from(&mut self, volume: &LabeledVolume, specs: &[StructureSpec], exec: Execution) {
        let fields = exec::map_slice(exec, specs, |s| structure_field(volume, s, Execution::Sequential));
        self.fields = fields;
    }
}

/// Argmin with tie-break `(critical first, lowest index)`. Infinite distances
/// never win.
pub fn nearest_structure(distances: &[f64], key: impl Fn(usize) -> (bool, u8)) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &d) in distances.iter().enumerate() {
        if !d.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let db = distances[b];
                let (ci, ii) = key(i);
                let (cb, ib) = key(b);
                let better = d < db || (d == db && ((ci && !cb) || (ci == cb && ii < ib)));
                Some(if better { i } else { b })
            }
        };
    }
    best
}
