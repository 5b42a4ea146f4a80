//! Labeled voxel anatomy and its on-disk format.
//!
//! # Volume file layout (version 1, all integers and floats little-endian)
//!
//! | field            | type                      |
//! |------------------|---------------------------|
//! | magic            | 4 bytes, `b"DTVL"`        |
//! | version          | u16 (= 1)                 |
//! | reserved         | u16 (= 0)                 |
//! | dims             | 3 × u32 (x, y, z)         |
//! | spacing (mm)     | 3 × f64                   |
//! | origin (mm)      | 3 × f64                   |
//! | structure count  | u16                       |
//! | per structure    | index u8, critical u8, gamma f64, lambda f64, stiffness f64, name length u16, name UTF-8 |
//! | label count      | u64 (= dims product)      |
//! | labels           | u8 per voxel, x fastest, then y, then z |
//!
//! A JSON sidecar named `<volume file>.structures.json` holding
//! `{"structures": [...]}` replaces the embedded structure table when present.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::{Error, Result};

pub const VOLUME_MAGIC: &[u8; 4] = b"DTVL";
pub const VOLUME_VERSION: u16 = 1;

/// Safety profile of one anatomical structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub index: u8,
    pub name: String,
    /// Proximity threshold (mm) for operating-structure estimation.
    pub gamma: f64,
    /// Force activation threshold (N); the safety limit sits 0.2 N above.
    pub lambda: f64,
    /// Penalty contact stiffness (N/mm).
    pub stiffness: f64,
    /// Critical structures can never be carved.
    pub critical: bool,
}

impl StructureSpec {
    pub fn new(index: u8, name: &str, gamma: f64, lambda: f64, stiffness: f64, critical: bool) -> Self {
        StructureSpec {
            index,
            name: name.to_string(),
            gamma,
            lambda,
            stiffness,
            critical,
        }
    }

    /// The five temporal-bone structures with their proximity and force
    /// thresholds. Stiffness values are simulation defaults chosen so that
    /// hand forces of a few newtons produce sub-2 N tip forces.
    pub fn temporal_bone() -> Vec<StructureSpec> {
        vec![
            StructureSpec::new(1, "Facial Nerve", 1.5, 0.8, 3.0, true),
            StructureSpec::new(2, "Tegmen", 1.5, 0.8, 3.0, true),
            StructureSpec::new(3, "Sigmoid", 1.5, 0.8, 3.0, true),
            StructureSpec::new(4, "Cortical", 0.0, 1.3, 4.0, false),
            StructureSpec::new(5, "Trabecular", 0.0, 1.3, 3.0, false),
        ]
    }

    /// Force above which a sample counts as undesired.
    pub fn safety_limit(&self) -> f64 {
        self.lambda + SAFETY_MARGIN
    }
}

/// Margin between the activation threshold and the safety limit (N).
pub const SAFETY_MARGIN: f64 = 0.2;

pub fn validate_specs(specs: &[StructureSpec]) -> Result<()> {
    let mut problems = Vec::new();
    let mut seen = [false; 256];
    for s in specs {
        if s.index == 0 {
            problems.push(format!("structure '{}' uses reserved index 0", s.name));
        }
        if seen[s.index as usize] {
            problems.push(format!("duplicate structure index {}", s.index));
        }
        seen[s.index as usize] = true;
        if !(s.gamma >= 0.0) || !s.gamma.is_finite() {
            problems.push(format!("structure {}: gamma must be >= 0", s.index));
        }
        if !(s.lambda > 0.0) || !s.lambda.is_finite() {
            problems.push(format!("structure {}: lambda must be > 0", s.index));
        }
        if !(s.stiffness > 0.0) || !s.stiffness.is_finite() {
            problems.push(format!("structure {}: stiffness must be > 0", s.index));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidStructures(problems.join("; ")))
    }
}

/// Dense labeled voxel grid. Label 0 is air; other values are structure
/// indices. Voxel `(i, j, k)` has its centre at `origin + (i, j, k) ⊙ spacing`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    labels: Vec<u8>,
}

impl LabeledVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], labels: Vec<u8>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!("spacing must be > 0, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidVolume("origin must be finite".into()));
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidVolume("dims overflow".into()))?;
        if n != labels.len() {
            return Err(Error::InvalidVolume(format!(
                "label storage has {} entries, dims imply {n}",
                labels.len()
            )));
        }
        Ok(LabeledVolume {
            dims,
            spacing,
            origin,
            labels,
        })
    }

    /// All-air volume.
    pub fn empty(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, spacing, origin, vec![0; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn label(&self, i: usize, j: usize, k: usize) -> u8 {
        self.labels[self.linear_index(i, j, k)]
    }

    pub fn set_label(&mut self, i: usize, j: usize, k: usize, label: u8) {
        let idx = self.linear_index(i, j, k);
        self.labels[idx] = label;
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        )
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn voxel_diagonal(&self) -> f64 {
        self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Axis-aligned box spanned by voxel centres.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let lo = Vec3::from(self.origin);
        let hi = self.voxel_center(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1);
        (lo, hi)
    }

    /// Every label must be 0 or a declared structure index.
    pub fn check_labels(&self, specs: &[StructureSpec]) -> Result<()> {
        let mut declared = [false; 256];
        declared[0] = true;
        for s in specs {
            declared[s.index as usize] = true;
        }
        let mut bad: Vec<u8> = Vec::new();
        for &l in &self.labels {
            if !declared[l as usize] && !bad.contains(&l) {
                bad.push(l);
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bad.sort_unstable();
            Err(Error::InvalidVolume(format!(
                "labels {bad:?} are not declared structures"
            )))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StructureTable {
    structures: Vec<StructureSpec>,
}

pub fn sidecar_path(volume_path: &Path) -> PathBuf {
    let mut s = volume_path.as_os_str().to_owned();
    s.push(".structures.json");
    PathBuf::from(s)
}

pub fn write_volume<W: Write>(mut w: W, volume: &LabeledVolume, specs: &[StructureSpec]) -> Result<()> {
    w.write_all(VOLUME_MAGIC)?;
    w.write_u16::<LittleEndian>(VOLUME_VERSION)?;
    w.write_u16::<LittleEndian>(0)?;
    for d in volume.dims {
        let d = u32::try_from(d).map_err(|_| Error::InvalidVolume("dimension exceeds u32".into()))?;
        w.write_u32::<LittleEndian>(d)?;
    }
    for v in volume.spacing.iter().chain(volume.origin.iter()) {
        w.write_f64::<LittleEndian>(*v)?;
    }
    w.write_u16::<LittleEndian>(specs.len() as u16)?;
    for s in specs {
        w.write_u8(s.index)?;
        w.write_u8(s.critical as u8)?;
        w.write_f64::<LittleEndian>(s.gamma)?;
        w.write_f64::<LittleEndian>(s.lambda)?;
        w.write_f64::<LittleEndian>(s.stiffness)?;
        let name = s.name.as_bytes();
        w.write_u16::<LittleEndian>(name.len() as u16)?;
        w.write_all(name)?;
    }
    w.write_u64::<LittleEndian>(volume.labels.len() as u64)?;
    w.write_all(&volume.labels)?;
    Ok(())
}

pub fn read_volume<R: Read>(mut r: R) -> Result<(LabeledVolume, Vec<StructureSpec>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VOLUME_MAGIC {
        return Err(Error::Format("not a labeled volume file (bad magic)".into()));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VOLUME_VERSION {
        return Err(Error::VersionMismatch {
            expected: VOLUME_VERSION,
            found: version,
        });
    }
    let _reserved = r.read_u16::<LittleEndian>()?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let mut spacing = [0.0; 3];
    let mut origin = [0.0; 3];
    for v in spacing.iter_mut().chain(origin.iter_mut()) {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let n_specs = r.read_u16::<LittleEndian>()?;
    let mut specs = Vec::with_capacity(n_specs as usize);
    for _ in 0..n_specs {
        let index = r.read_u8()?;
        let critical = r.read_u8()? != 0;
        let gamma = r.read_f64::<LittleEndian>()?;
        let lambda = r.read_f64::<LittleEndian>()?;
        let stiffness = r.read_f64::<LittleEndian>()?;
        let len = r.read_u16::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("structure name is not UTF-8".into()))?;
        specs.push(StructureSpec {
            index,
            name,
            gamma,
            lambda,
            stiffness,
            critical,
        });
    }
    let count = r.read_u64::<LittleEndian>()? as usize;
    let expected: usize = dims.iter().product();
    if count != expected {
        return Err(Error::Format(format!(
            "label count {count} does not match dims {dims:?}"
        )));
    }
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)?;
    let volume = LabeledVolume::new(dims, spacing, origin, labels)?;
    Ok((volume, specs))
}

/// Writes the volume and, when `sidecar` is set, the JSON structure table next
/// to it.
pub fn save_volume(path: &Path, volume: &LabeledVolume, specs: &[StructureSpec], sidecar: bool) -> Result<()> {
    let f = BufWriter::new(File::create(path).map_err(|e| crate::error::io_at(path, e))?);
    write_volume(f, volume, specs)?;
    if sidecar {
        let table = StructureTable {
            structures: specs.to_vec(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&table)?)?;
    }
    Ok(())
}

/// Loads a volume file, preferring the JSON sidecar's structure table when one
/// exists, and validates the labels against the table.
pub fn load_volume(path: &Path) -> Result<(LabeledVolume, Vec<StructureSpec>)> {
    let (volume, mut specs) = read_volume(BufReader::new(
        File::open(path).map_err(|e| crate::error::io_at(path, e))?,
    ))?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let table: StructureTable = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
        specs = table.structures;
    }
    validate_specs(&specs)?;
    volume.check_labels(&specs)?;
    Ok((volume, specs))
}
