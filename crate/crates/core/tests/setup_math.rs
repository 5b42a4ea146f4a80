mod common;

use common::{gauss3, pivot_trial, random_rotation, registration_trial, rng};
use drilltwin::geometry::{RigidTransform, Vec3};
use drilltwin::twin::{pivot_calibrate, register_point_sets};
use proptest::prelude::*;

#[test]
fn registration_recovers_known_transform() {
    let mut r = rng(31);
    for _ in 0..50 {
        let model: Vec<Vec3> = (0..6).map(|_| gauss3(&mut r, 20.0)).collect();
        let truth = RigidTransform::new(*random_rotation(&mut r, 3.0).rotation(), gauss3(&mut r, 40.0)).unwrap();
        let measured: Vec<Vec3> = model.iter().map(|p| truth.transform_point(p)).collect();
        let reg = register_point_sets(&model, &measured).unwrap();
        assert!((reg.transform.rotation() - truth.rotation()).amax() < 1e-9);
        assert!((reg.transform.translation() - truth.translation()).amax() < 1e-9);
        assert!(reg.rmse < 1e-9);
    }
}

#[test]
fn registration_rejects_degenerate_sets() {
    let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    assert!(register_point_sets(&line, &line).is_err());
    assert!(register_point_sets(&line[..2], &line[..2]).is_err());
    assert!(register_point_sets(&line, &line[..4]).is_err());
}

#[test]
fn registration_noise_statistics() {
    let mut r = rng(32);
    let rmse: Vec<f64> = (0..100).map(|_| registration_trial(&mut r, 0.2)).collect();
    assert!(rmse.iter().filter(|&&e| e < 0.5).count() >= 95);
}

#[test]
fn pivot_recovers_known_tip() {
    let mut r = rng(33);
    let tip = Vec3::new(1.0, -2.0, 150.0);
    let pivot = Vec3::new(10.0, 20.0, -30.0);
    let poses: Vec<RigidTransform> = (0..20)
        .map(|_| {
            let rot = random_rotation(&mut r, 0.6);
            RigidTransform::new(*rot.rotation(), pivot - rot.transform_vector(&tip)).unwrap()
        })
        .collect();
    let cal = pivot_calibrate(&poses).unwrap();
    assert!((cal.tip_offset - tip).amax() < 1e-9);
    assert!((cal.pivot - pivot).amax() < 1e-9);
    assert!(cal.rmse < 1e-9);
}

#[test]
fn pivot_refuses_near_identical_orientations() {
    let poses: Vec<RigidTransform> = (0..10)
        .map(|i| RigidTransform::from_translation(Vec3::new(i as f64 * 1e-3, 0.0, 0.0)))
        .collect();
    assert!(pivot_calibrate(&poses).is_err());
    assert!(pivot_calibrate(&poses[..2]).is_err());
}

#[test]
fn pivot_noise_statistics() {
    let mut r = rng(34);
    let rmse: Vec<f64> = (0..100).map(|_| pivot_trial(&mut r, 0.05)).collect();
    assert!(rmse.iter().filter(|&&e| e <= 0.1).count() >= 95);
}

proptest! {
    #[test]
    fn registration_rmse_is_invariant_to_common_motion(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model: Vec<Vec3> = (0..6).map(|_| gauss3(&mut r, 20.0)).collect();
        let measured: Vec<Vec3> = model.iter().map(|p| p + gauss3(&mut r, 0.5)).collect();
        let g = RigidTransform::new(*random_rotation(&mut r, 3.0).rotation(), gauss3(&mut r, 50.0)).unwrap();
        let a = register_point_sets(&model, &measured).unwrap().rmse;
        let gm: Vec<Vec3> = model.iter().map(|p| g.transform_point(p)).collect();
        let gs: Vec<Vec3> = measured.iter().map(|p| g.transform_point(p)).collect();
        let b = register_point_sets(&gm, &gs).unwrap().rmse;
        prop_assert!((a - b).abs() < 1e-9);
    }
}
