use drilltwin::controller::{
    step_controller, ControllerInputs, ControllerParams, ControllerState, EventKind, Regime, SigmaLaw,
};
use drilltwin::twin::StructureSpec;
use proptest::prelude::*;

const DT: f64 = 0.002;

fn specs() -> Vec<StructureSpec> {
    StructureSpec::temporal_bone()
}

/// Distances with the nerve (index 1) nearest.
fn near_nerve() -> Vec<f64> {
    vec![0.1, 3.0, 3.0, 2.0, 2.0]
}

fn near(pos: usize) -> Vec<f64> {
    let mut d = vec![2.5; 5];
    d[pos] = 0.1;
    d
}

fn run(params: &ControllerParams, forces: &[f64], distances: &[f64]) -> Vec<(f64, ControllerState)> {
    let specs = specs();
    let mut state = ControllerState::new(params);
    forces
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let t = i as f64 * DT;
            let out = step_controller(
                &ControllerInputs {
                    t,
                    force: f,
                    distances,
                    stale: false,
                },
                &mut state,
                params,
                &specs,
            )
            .unwrap();
            (out.sigma, state.clone())
        })
        .collect()
}

#[test]
fn onset_gain_equals_contact_gain() {
    let p = ControllerParams::default();
    let mut forces = vec![0.0; 5];
    forces.extend([0.5; 5]);
    forces.extend([1.8; 5]);
    let trace = run(&p, &forces, &near_nerve());
    let onset = trace.iter().position(|(_, s)| s.regime == Regime::Overforce).unwrap();
    assert_eq!(onset, 10);
    assert!((trace[onset].0 - p.sigma_contact).abs() < 1e-12);
    assert!(trace[onset + 1].0 < p.sigma_contact);
}

#[test]
fn constant_overforce_follows_closed_form() {
    for law in [SigmaLaw::Integral, SigmaLaw::Literal] {
        let p = ControllerParams {
            sigma_law: law,
            ..Default::default()
        };
        // Onset at tick 1, then one second of 1.8 N against U = 0.8 N.
        let mut forces = vec![0.5];
        forces.extend(vec![1.8; 501]);
        let trace = run(&p, &forces, &near_nerve());
        let expect = 0.4 * (-1.0f64).exp() + 0.3;
        assert!((trace[501].0 - expect).abs() < 1e-9, "{law:?}: {}", trace[501].0);
    }
}

#[test]
fn threshold_follows_the_operating_structure() {
    let p = ControllerParams::default();
    for (pos, spec) in specs().iter().enumerate() {
        let trace = run(&p, &[0.0, 1.0, 1.0], &near(pos));
        let state = &trace[2].1;
        assert_eq!(state.structure, Some(spec.index));
        assert_eq!(state.threshold, Some(spec.lambda));
        let expect = if 1.0 >= spec.lambda {
            Regime::Overforce
        } else {
            Regime::Contact
        };
        assert_eq!(state.regime, expect);
    }
}

#[test]
fn critical_structures_win_ties() {
    let p = ControllerParams::default();
    // Cortical (non-critical, index 4) and sigmoid (critical, index 3) tie.
    let d = vec![2.0, 2.0, 0.4, 0.4, 2.0];
    let trace = run(&p, &[0.5], &d);
    assert_eq!(trace[0].1.structure, Some(3));
}

#[test]
fn structure_switch_restarts_the_overforce_clock() {
    let p = ControllerParams::default();
    let specs = specs();
    let mut state = ControllerState::new(&p);
    let mut step = |t: f64, f: f64, d: &[f64]| {
        step_controller(
            &ControllerInputs {
                t,
                force: f,
                distances: d,
                stale: false,
            },
            &mut state,
            &p,
            &specs,
        )
        .unwrap()
    };
    step(0.0, 1.8, &near(0));
    let before = step(0.5, 1.8, &near(0)).sigma;
    assert!(before < 0.7);
    let after = step(0.502, 1.8, &near(1));
    assert_eq!(after.sigma, p.sigma_contact);
    assert!(after.events.iter().any(|e| matches!(
        e.kind,
        EventKind::Structure {
            from: Some(1),
            to: Some(2)
        }
    )));
}

#[test]
fn disabled_controller_holds_fixed_gain() {
    let p = ControllerParams {
        enabled: false,
        ..Default::default()
    };
    let trace = run(&p, &[0.0, 0.5, 1.8, 1.8, 0.0], &near_nerve());
    assert!(trace.iter().all(|(s, _)| *s == 1.0));
    // Estimation keeps running for the logs.
    assert_eq!(trace[2].1.regime, Regime::Overforce);
}

#[test]
fn hysteresis_band_suppresses_boundary_chatter() {
    let p = ControllerParams::default();
    // Oscillate ±0.04 N around C; inside the 0.05 N band.
    let forces: Vec<f64> = (0..400).map(|i| 0.3 + 0.04 * (i as f64 * 0.7).sin()).collect();
    let trace = run(&p, &forces, &near_nerve());
    let transitions = trace.windows(2).filter(|w| w[0].1.regime != w[1].1.regime).count();
    assert!(transitions <= 1);
}

#[test]
fn slew_limit_bounds_gain_rate() {
    let p = ControllerParams {
        slew_limit: Some(5.0),
        ..Default::default()
    };
    let trace = run(&p, &[0.0, 0.5, 0.5, 0.5, 1.8, 1.8, 0.0, 0.0], &near_nerve());
    for w in trace.windows(2) {
        assert!((w[1].0 - w[0].0).abs() <= 5.0 * DT + 1e-12);
    }
}

#[test]
fn rejects_time_going_backwards() {
    let p = ControllerParams::default();
    let specs = specs();
    let mut s = ControllerState::new(&p);
    let d = near_nerve();
    let input = |t| ControllerInputs {
        t,
        force: 0.5,
        distances: &d,
        stale: false,
    };
    step_controller(&input(1.0), &mut s, &p, &specs).unwrap();
    assert!(step_controller(&input(0.5), &mut s, &p, &specs).is_err());
    let short = [0.1];
    let bad = ControllerInputs {
        t: 2.0,
        force: 0.5,
        distances: &short,
        stale: false,
    };
    assert!(step_controller(&bad, &mut s, &p, &specs).is_err());
}

proptest! {
    #[test]
    fn gain_stays_in_bounds(
        forces in prop::collection::vec(0.0f64..5.0, 1..300),
        nearest in 0usize..5,
        literal in any::<bool>(),
    ) {
        let p = ControllerParams {
            sigma_law: if literal { SigmaLaw::Literal } else { SigmaLaw::Integral },
            ..Default::default()
        };
        for (s, _) in run(&p, &forces, &near(nearest)) {
            prop_assert!((p.sigma_low..=p.sigma_high).contains(&s));
        }
    }

    #[test]
    fn gain_never_rises_under_sustained_overforce(f in 0.81f64..5.0, n in 2usize..200) {
        let p = ControllerParams::default();
        let trace = run(&p, &vec![f; n], &near_nerve());
        for w in trace.windows(2) {
            prop_assert!(w[1].0 <= w[0].0);
        }
    }

    #[test]
    fn operating_structure_is_a_nearest_one(d in prop::collection::vec(-1.0f64..5.0, 5)) {
        let p = ControllerParams::default();
        let trace = run(&p, &[0.5], &d);
        let s = trace[0].1.structure.unwrap();
        let pos = specs().iter().position(|x| x.index == s).unwrap();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d[pos], min);
        prop_assert_eq!(trace[0].1.structure_fallback, d[pos] > specs()[pos].gamma);
    }
}
