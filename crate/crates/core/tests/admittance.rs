mod common;

use common::{damped_objective, gauss, pinv_solve, random_full_rank_jacobian, rng};
use drilltwin::geometry::Vec3;
use drilltwin::robot::{solve_admittance, Frame, GainMatrix, KinematicChain, Wrench};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_wrench(r: &mut rand_chacha::ChaCha8Rng) -> Wrench {
    Wrench::new(
        Vec3::new(gauss(r), gauss(r), gauss(r)),
        Vec3::new(gauss(r), gauss(r), gauss(r)) * 10.0,
        Frame::World,
    )
}

fn target(gains: &GainMatrix, sigma: f64, w: &Wrench) -> DVector<f64> {
    DVector::from_column_slice((gains.apply(w) * sigma).as_slice())
}

#[test]
fn undamped_matches_pseudo_inverse() {
    let mut r = rng(21);
    for _ in 0..200 {
        let m = r.random_range(2..=9);
        let j = random_full_rank_jacobian(&mut r, m);
        let gains = GainMatrix::new([0.0; 6].map(|_| r.random_range(0.5..3.0))).unwrap();
        let sigma = r.random_range(0.3..1.7);
        let w = random_wrench(&mut r);
        let dq = solve_admittance(&j, &gains, sigma, &w, 0.0).unwrap();
        let oracle = pinv_solve(&j, &target(&gains, sigma, &w));
        assert!((dq - oracle).amax() < 1e-9);
    }
}

#[test]
fn damped_solution_is_a_local_minimum() {
    let mut r = rng(22);
    for _ in 0..100 {
        let m = r.random_range(2..=9);
        let j = DMatrix::from_fn(6, m, |_, _| r.random_range(-2.0..2.0));
        let gains = GainMatrix::new([1.0; 6]).unwrap();
        let w = random_wrench(&mut r);
        let mu = r.random_range(1e-3..0.5);
        let dq = solve_admittance(&j, &gains, 1.0, &w, mu).unwrap();
        let b = target(&gains, 1.0, &w);
        let f0 = damped_objective(&j, &b, mu, &dq);
        for _ in 0..50 {
            let delta = DVector::from_fn(m, |_, _| gauss(&mut r) * 1e-4);
            assert!(damped_objective(&j, &b, mu, &(&dq + delta)) >= f0 - 1e-12);
        }
    }
}

#[test]
fn singular_jacobian_stays_bounded() {
    // Two identical columns and a zero column.
    let mut j = DMatrix::zeros(6, 4);
    j[(0, 0)] = 1.0;
    j[(0, 1)] = 1.0;
    j[(1, 2)] = 1.0;
    let gains = GainMatrix::new([1.0; 6]).unwrap();
    let w = Wrench::new(Vec3::new(1.0, 1.0, 1.0), Vec3::zeros(), Frame::World);
    let damped = solve_admittance(&j, &gains, 1.0, &w, 1e-3).unwrap();
    assert!(damped.iter().all(|v| v.is_finite()) && damped.norm() < 10.0);
    let undamped = solve_admittance(&j, &gains, 1.0, &w, 0.0).unwrap();
    let oracle = pinv_solve(&j, &target(&gains, 1.0, &w));
    assert!((undamped - oracle).amax() < 1e-9);
}

#[test]
fn zero_hand_force_means_no_motion() {
    let chain = KinematicChain::default_arm();
    let q = vec![0.1; chain.dof()];
    let j = chain.jacobian(&q);
    let dq = solve_admittance(&j, chain.gains(), 1.7, &Wrench::zero(Frame::World), 1e-3).unwrap();
    assert_eq!(dq.amax(), 0.0);
}

#[test]
fn rejects_bad_arguments() {
    let j = DMatrix::identity(6, 6);
    let g = GainMatrix::new([1.0; 6]).unwrap();
    let w = Wrench::zero(Frame::World);
    assert!(solve_admittance(&j, &g, 0.0, &w, 0.0).is_err());
    assert!(solve_admittance(&j, &g, 1.0, &w, -1.0).is_err());
    assert!(solve_admittance(&DMatrix::identity(5, 6), &g, 1.0, &w, 0.0).is_err());
    let bad = Wrench::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::zeros(), Frame::World);
    assert!(solve_admittance(&j, &g, 1.0, &bad, 0.0).is_err());
}

proptest! {
    #[test]
    fn rate_scales_linearly_with_sigma(seed in any::<u64>(), s in 0.3f64..1.7) {
        let mut r = rng(seed);
        let j = random_full_rank_jacobian(&mut r, 6);
        let g = GainMatrix::new([1.0; 6]).unwrap();
        let w = random_wrench(&mut r);
        let base = solve_admittance(&j, &g, 1.0, &w, 1e-3).unwrap();
        let scaled = solve_admittance(&j, &g, s, &w, 1e-3).unwrap();
        prop_assert!((scaled - base * s).amax() < 1e-9);
    }
}
