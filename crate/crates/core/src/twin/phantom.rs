//! Synthetic temporal-bone-like phantom.
//!
//! The phantom is a bone block seen after a cortical mastoidectomy:
//!
//! - trabecular bone fills `z < 12 mm`, capped by a 1.5 mm cortical layer;
//! - a box cavity `x, y ∈ [4, 14] mm, z ≥ 7 mm` has been drilled out;
//! - the facial nerve is a cylinder (radius 0.8 mm) along `y` at
//!   `x = 9, z = 6.2`, flush with the cavity floor;
//! - the tegmen is a 1 mm plate forming the `y = 14` cavity wall;
//! - the sigmoid sinus is a vertical cylinder (radius 1 mm) at `x = 3, y = 9`,
//!   flush with the `x = 4` cavity wall.
//!
//! Coordinates are millimetres in the anatomy frame with the grid origin at
//! the centre of voxel `(0, 0, 0)`. A non-zero `jitter` shifts the critical
//! structures by a seeded uniform offset of at most that many millimetres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::volume::{LabeledVolume, StructureSpec};
use crate::geometry::Vec3;
use crate::Result;

pub const FACIAL_NERVE: u8 = 1;
pub const TEGMEN: u8 = 2;
pub const SIGMOID: u8 = 3;
pub const CORTICAL: u8 = 4;
pub const TRABECULAR: u8 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub seed: u64,
    pub jitter: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [72, 72, 72],
            spacing: 0.25,
            seed: 0,
            jitter: 0.0,
        }
    }
}

/// Landmark points on the phantom, useful for scripting scenarios.
#[derive(Clone, Copy, Debug)]
pub struct PhantomLandmarks {
    pub cavity_floor_z: f64,
    pub cortical_top_z: f64,
    pub nerve_axis: (f64, f64),
    pub tegmen_wall_y: f64,
    pub sigmoid_axis: (f64, f64),
}

impl PhantomLandmarks {
    pub const fn nominal() -> Self {
        PhantomLandmarks {
            cavity_floor_z: 7.0,
            cortical_top_z: 13.5,
            nerve_axis: (9.0, 6.2),
            tegmen_wall_y: 14.0,
            sigmoid_axis: (3.0, 9.0),
        }
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<(LabeledVolume, Vec<StructureSpec>, PhantomLandmarks)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jitter = || {
        if spec.jitter > 0.0 {
            rng.random_range(-spec.jitter..=spec.jitter)
        } else {
            0.0
        }
    };
    let nominal = PhantomLandmarks::nominal();
    let nerve = (nominal.nerve_axis.0 + jitter(), nominal.nerve_axis.1 + jitter());
    let tegmen_y = nominal.tegmen_wall_y + jitter();
    let sigmoid = (nominal.sigmoid_axis.0 + jitter(), nominal.sigmoid_axis.1 + jitter());
    let landmarks = PhantomLandmarks {
        nerve_axis: nerve,
        tegmen_wall_y: tegmen_y,
        sigmoid_axis: sigmoid,
        ..nominal
    };

    let h = spec.spacing;
    let mut volume = LabeledVolume::empty(spec.dims, [h; 3], [0.0; 3])?;
    let [nx, ny, nz] = spec.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = volume.voxel_center(i, j, k);
                let label = classify(&p, &landmarks);
                if label != 0 {
                    volume.set_label(i, j, k, label);
                }
            }
        }
    }
    Ok((volume, StructureSpec::temporal_bone(), landmarks))
}

fn classify(p: &Vec3, m: &PhantomLandmarks) -> u8 {
    let (x, y, z) = (p.x, p.y, p.z);
    let cortex_base = m.cortical_top_z - 1.5;
    if z >= m.cortical_top_z {
        return 0;
    }
    let (nx, nz) = m.nerve_axis;
    if (x - nx).powi(2) + (z - nz).powi(2) <= 0.8 * 0.8 {
        return FACIAL_NERVE;
    }
    let (sx, sy) = m.sigmoid_axis;
    if z < cortex_base && (x - sx).powi(2) + (y - sy).powi(2) <= 1.0 {
        return SIGMOID;
    }
    let in_cavity_xy = (4.0..14.0).contains(&x) && (4.0..m.tegmen_wall_y).contains(&y);
    if in_cavity_xy && z >= m.cavity_floor_z {
        return 0;
    }
    if (4.0..14.0).contains(&x)
        && (m.tegmen_wall_y..m.tegmen_wall_y + 1.0).contains(&y)
        && (m.cavity_floor_z..cortex_base).contains(&z)
    {
        return TEGMEN;
    }
    if z >= cortex_base {
        CORTICAL
    } else {
        TRABECULAR
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_structure_is_present() {
        let (v, specs, _) = generate_phantom(&PhantomSpec::default()).unwrap();
        v.check_labels(&specs).unwrap();
        for s in &specs {
            assert!(v.count(s.index) > 0, "{} missing", s.name);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = PhantomSpec {
            dims: [24, 24, 24],
            spacing: 0.75,
            seed: 3,
            jitter: 0.4,
        };
        let a = generate_phantom(&spec).unwrap().0;
        let b = generate_phantom(&spec).unwrap().0;
        assert_eq!(a, b);
    }
}
