//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance run.
#![allow(dead_code)]

use std::path::PathBuf;

use drilltwin::geometry::{RigidTransform, Vec3};
use drilltwin::scenario::{InputSource, RunLog, Scenario, Segment};
use drilltwin::twin::{pivot_calibrate, register_point_sets, LabeledVolume};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gauss3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    Vec3::new(gauss(rng), gauss(rng), gauss(rng)) * std
}

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(&workspace_root().join("scenarios").join(name)).expect("shipped scenario loads")
}

// ---------------------------------------------------------------- distance

/// Random grid of at most 32³ voxels with blobs of label 1, anisotropic
/// spacing and random origin.
pub fn random_volume(rng: &mut ChaCha8Rng) -> LabeledVolume {
    let dims = [
        rng.random_range(1..=32),
        rng.random_range(1..=32),
        rng.random_range(1..=32),
    ];
    let spacing = [
        rng.random_range(0.1..1.5),
        rng.random_range(0.1..1.5),
        rng.random_range(0.1..1.5),
    ];
    let origin = [
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    ];
    let n = dims[0] * dims[1] * dims[2];
    let mut labels = vec![0u8; n];
    let style = rng.random_range(0..4);
    let density: f64 = rng.random_range(0.01..0.6);
    let blobs: Vec<([f64; 3], f64)> = (0..rng.random_range(1..4))
        .map(|_| {
            (
                [
                    rng.random_range(0.0..dims[0] as f64),
                    rng.random_range(0.0..dims[1] as f64),
                    rng.random_range(0.0..dims[2] as f64),
                ],
                rng.random_range(0.5..8.0),
            )
        })
        .collect();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let idx = i + dims[0] * (j + dims[1] * k);
                let in_blob = blobs.iter().any(|(c, r)| {
                    let d = [i as f64 - c[0], j as f64 - c[1], k as f64 - c[2]];
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
                });
                labels[idx] = match style {
                    0 => in_blob as u8,
                    1 => rng.random_bool(density) as u8,
                    2 => (in_blob ^ rng.random_bool(0.05)) as u8,
                    _ => (rng.random_range(0..n) < 2) as u8,
                };
            }
        }
    }
    LabeledVolume::new(dims, spacing, origin, labels).unwrap()
}

/// Signed distance by exhaustive search over voxel centres: outside, the
/// distance to the nearest `label` centre; inside, minus the distance to the
/// nearest other centre.
pub fn brute_force_sdf(volume: &LabeledVolume, label: u8) -> Vec<f64> {
    let dims = volume.dims();
    let s = volume.spacing();
    let centres: Vec<([f64; 3], bool)> = (0..volume.len())
        .map(|idx| {
            let [i, j, k] = volume.coords(idx);
            (
                [i as f64 * s[0], j as f64 * s[1], k as f64 * s[2]],
                volume.labels()[idx] == label,
            )
        })
        .collect();
    let inside: Vec<&[f64; 3]> = centres.iter().filter(|c| c.1).map(|c| &c.0).collect();
    let outside: Vec<&[f64; 3]> = centres.iter().filter(|c| !c.1).map(|c| &c.0).collect();
    let nearest = |p: &[f64; 3], set: &[&[f64; 3]]| -> f64 {
        set.iter()
            .map(|q| {
                let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    };
    assert_eq!(centres.len(), dims[0] * dims[1] * dims[2]);
    centres
        .iter()
        .map(|(p, is_in)| {
            if *is_in {
                -nearest(p, &outside)
            } else {
                nearest(p, &inside)
            }
        })
        .collect()
}

/// Largest |a − b|, with equal infinities counting as zero.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, f64::max)
}

// --------------------------------------------------------------- admittance

/// 6×m Jacobian with singular values in [0.1, 10] (full rank).
pub fn random_full_rank_jacobian(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    loop {
        let j = DMatrix::from_fn(6, m, |_, _| rng.random_range(-2.0..2.0));
        let sv = j.clone().svd(false, false).singular_values;
        let (lo, hi) = (sv.min(), sv.max());
        if lo > 0.1 && hi < 10.0 {
            return j;
        }
    }
}

/// Minimum-norm least-squares solution through the SVD pseudo-inverse.
pub fn pinv_solve(j: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    j.clone().pseudo_inverse(1e-12).unwrap() * b
}

/// `‖J·q̇ − b‖² + μ²‖q̇‖²`.
pub fn damped_objective(j: &DMatrix<f64>, b: &DVector<f64>, mu: f64, qdot: &DVector<f64>) -> f64 {
    (j * qdot - b).norm_squared() + mu * mu * qdot.norm_squared()
}

// --------------------------------------------------------------- setup math

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> RigidTransform {
    let axis = loop {
        let a = gauss3(rng, 1.0);
        if a.norm() > 1e-3 {
            break a;
        }
    };
    RigidTransform::from_axis_angle(axis, rng.random_range(-max_angle..max_angle))
}

/// One registration trial: 6 fiducials, isotropic noise `std` on every
/// measured coordinate. Returns the reported RMSE.
pub fn registration_trial(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let model: Vec<Vec3> = (0..6).map(|_| gauss3(rng, 30.0)).collect();
    let truth =
        random_rotation(rng, std::f64::consts::PI).compose(&RigidTransform::from_translation(gauss3(rng, 50.0)));
    let measured: Vec<Vec3> = model
        .iter()
        .map(|p| truth.transform_point(p) + gauss3(rng, std))
        .collect();
    register_point_sets(&model, &measured).unwrap().rmse
}

/// One pivot trial: 40 tool poses rocking up to 35° about a fixed pivot,
/// with isotropic noise `std` on each pose translation. Returns the
/// reported RMSE.
pub fn pivot_trial(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let tip = Vec3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(120.0..180.0),
    );
    let pivot = gauss3(rng, 100.0);
    let poses: Vec<RigidTransform> = (0..40)
        .map(|_| {
            let r = random_rotation(rng, 35f64.to_radians());
            // p_i = pivot − R_i·tip, so R_i·tip + p_i lands on the pivot.
            let p = pivot - r.transform_vector(&tip) + gauss3(rng, std);
            RigidTransform::new(*r.rotation(), p).unwrap()
        })
        .collect();
    pivot_calibrate(&poses).unwrap().rmse
}

// ---------------------------------------------------------------- scenarios

/// `[start, end + 0.5 s)` for every press segment of a scripted scenario.
pub fn press_windows(s: &Scenario) -> Vec<(f64, f64)> {
    let InputSource::Scripted { segments, .. } = &s.input else {
        panic!("scenario is not scripted");
    };
    let mut t = 0.0;
    let mut out = Vec::new();
    for seg in segments {
        let d = seg.duration();
        if matches!(seg, Segment::Press { .. }) {
            out.push((t, t + d + 0.5));
        }
        t += d;
    }
    out
}

/// Regime changes between consecutive records inside each window, and
/// whether the window saw any contact at all.
pub fn transitions_per_window(log: &RunLog, windows: &[(f64, f64)]) -> Vec<(usize, bool)> {
    windows
        .iter()
        .map(|&(a, b)| {
            let recs: Vec<_> = log.records.iter().filter(|r| r.t >= a && r.t < b).collect();
            let n = recs.windows(2).filter(|w| w[0].regime != w[1].regime).count();
            let touched = recs.iter().any(|r| r.regime != drilltwin::controller::Regime::Free);
            (n, touched)
        })
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn log_bytes(log: &RunLog) -> Vec<u8> {
    let mut buf = Vec::new();
    log.write_binary(&mut buf).unwrap();
    buf
}
