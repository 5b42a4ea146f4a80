//! One PASS/FAIL line per acceptance criterion, each with its wall-clock
//! budget. Exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    brute_force_sdf, damped_objective, gauss, log_bytes, max_abs_diff, median, pinv_solve, pivot_trial, press_windows,
    random_full_rank_jacobian, random_volume, registration_trial, rng, scenario, transitions_per_window,
    workspace_root,
};
use drilltwin::controller::{step_controller, ControllerInputs, ControllerParams, ControllerState, Regime};
use drilltwin::exec::Execution;
use drilltwin::geometry::Vec3;
use drilltwin::robot::{solve_admittance, Frame, GainMatrix, Wrench};
use drilltwin::scenario::{compute_metrics, replay_log, run_batch, run_seeded, Attribution, RunLog};
use drilltwin::twin::{build_sdf_with, StructureSpec};
use drilltwin_session::{LiveSession, SteerCommand};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

const DT: f64 = 0.002;

/// Controller trace with the nerve (critical, U = 0.8 N) nearest.
fn gain_trace(forces: &[f64]) -> Vec<(f64, Regime)> {
    let params = ControllerParams::default();
    let specs = StructureSpec::temporal_bone();
    let distances = [0.1, 3.0, 3.0, 2.0, 2.0];
    let mut state = ControllerState::new(&params);
    forces
        .iter()
        .enumerate()
        .map(|(i, &force)| {
            let inputs = ControllerInputs {
                t: i as f64 * DT,
                force,
                distances: &distances,
                stale: false,
            };
            let out = step_controller(&inputs, &mut state, &params, &specs).unwrap();
            (out.sigma, state.regime)
        })
        .collect()
}

fn gain_law() -> Outcome {
    let p = ControllerParams::default();
    let mut forces = vec![0.0, 0.5];
    forces.extend([1.8; 501]);
    let trace = gain_trace(&forces);
    let onset = trace.iter().position(|(_, r)| *r == Regime::Overforce).unwrap();
    let onset_err = (trace[onset].0 - p.sigma_contact).abs();
    let closed = 0.4 * (-1.0f64).exp() + 0.3;
    let one_second = (trace[onset + 500].0 - closed).abs();

    let mut r = rng(101);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    // Piecewise-constant pushes, long enough to drive the gain to its floor.
    for _ in 0..200 {
        let mut f = Vec::new();
        for _ in 0..r.random_range(1..8) {
            let level = r.random_range(0.0..5.0);
            f.extend(std::iter::repeat_n(level, r.random_range(1..2000)));
        }
        for (s, _) in gain_trace(&f) {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    let pass = onset_err <= 1e-12 && one_second <= 1e-9 && lo >= 0.3 && hi <= 1.7;
    outcome(
        pass,
        format!("onset err {onset_err:.1e}, 1 s err {one_second:.1e}, range [{lo:.3}, {hi:.3}]"),
    )
}

fn distance_transform() -> Outcome {
    let spec = vec![StructureSpec::new(1, "bone", 0.0, 1.3, 1.0, false)];
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v = random_volume(&mut r);
        let sdf = build_sdf_with(&v, &spec, Execution::Parallel).unwrap();
        let field = sdf.field(0);
        if field.is_absent() {
            if v.count(1) != 0 {
                return outcome(false, "labeled grid produced no field");
            }
            continue;
        }
        worst = worst.max(max_abs_diff(field.values(), &brute_force_sdf(&v, 1)));
    }
    outcome(worst <= 1e-9, format!("200 grids, max error {worst:.1e} mm"))
}

fn admittance() -> Outcome {
    let mut r = rng(103);
    let wrench = |r: &mut rand_chacha::ChaCha8Rng| {
        Wrench::new(
            Vec3::new(gauss(r), gauss(r), gauss(r)),
            Vec3::new(gauss(r), gauss(r), gauss(r)) * 10.0,
            Frame::World,
        )
    };
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..1000 {
        let m = r.random_range(2..=9);
        let j = random_full_rank_jacobian(&mut r, m);
        let gains = GainMatrix::new([0.0; 6].map(|_| r.random_range(0.5..3.0))).unwrap();
        let sigma = r.random_range(0.3..1.7);
        let w = wrench(&mut r);
        let b = DVector::from_column_slice((gains.apply(&w) * sigma).as_slice());
        let dq = solve_admittance(&j, &gains, sigma, &w, 0.0).unwrap();
        worst = worst.max((dq - pinv_solve(&j, &b)).amax());

        let j = DMatrix::from_fn(6, m, |_, _| r.random_range(-2.0..2.0));
        let mu = r.random_range(1e-3..0.5);
        let dq = solve_admittance(&j, &gains, sigma, &w, mu).unwrap();
        let f0 = damped_objective(&j, &b, mu, &dq);
        for _ in 0..100 {
            let delta = DVector::from_fn(m, |_, _| gauss(&mut r) * 1e-4);
            if damped_objective(&j, &b, mu, &(&dq + delta)) < f0 - 1e-12 {
                violations += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9 && violations == 0,
        format!("max pinv error {worst:.1e}, {violations} descent perturbations"),
    )
}

fn setup_math() -> Outcome {
    let mut r = rng(104);
    let reg = (0..100).filter(|_| registration_trial(&mut r, 0.2) < 0.5).count();
    let piv = (0..100).filter(|_| pivot_trial(&mut r, 0.05) <= 0.1).count();
    outcome(
        reg >= 95 && piv >= 95,
        format!("registration {reg}/100, pivot {piv}/100"),
    )
}

fn table2() -> Outcome {
    let expected = [
        ("table2_wo.csv", [0.726, 0.549, 0.567, 0.372, 0.209]),
        ("table2_w.csv", [0.322, 0.370, 0.382, 0.243, 0.042]),
    ];
    let mut got = Vec::new();
    let mut pass = true;
    for (file, want) in expected {
        let log = RunLog::load(&workspace_root().join("fixtures").join(file)).unwrap();
        let m = compute_metrics(&log, &log.header.structures, Attribution::Controller).unwrap();
        for (row, w) in m.rows.iter().zip(want) {
            let p = format!("{:.3}", row.proportion.unwrap_or(f64::NAN));
            pass &= p == format!("{w:.3}");
            got.push(p);
        }
    }
    outcome(pass, format!("proportions {}", got.join(" ")))
}

struct Efficacy {
    proportions: Vec<f64>,
    critical_max: f64,
}

fn efficacy() -> Outcome {
    let base = scenario("aggressive.toml");
    let seeds: Vec<u64> = (1..=20).collect();
    let summarise = |log: RunLog| {
        let m = compute_metrics(&log, &log.header.structures, Attribution::Controller).unwrap();
        Efficacy {
            proportions: m.rows.iter().map(|r| r.proportion.unwrap_or(0.0)).collect(),
            critical_max: log
                .records
                .iter()
                .filter(|r| {
                    r.structure
                        .is_some_and(|s| log.header.structures.iter().any(|x| x.index == s && x.critical))
                })
                .map(|r| r.true_force())
                .fold(0.0, f64::max),
        }
    };
    let mut on = base.clone();
    on.controller.enabled = true;
    let mut off = base;
    off.controller.enabled = false;
    let a = run_batch(&on, &seeds, Execution::Parallel, summarise).unwrap();
    let b = run_batch(&off, &seeds, Execution::Parallel, summarise).unwrap();

    let structures = StructureSpec::temporal_bone();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, spec) in structures.iter().enumerate() {
        let m_on = median(a.iter().map(|e| e.proportions[k]).collect());
        let m_off = median(b.iter().map(|e| e.proportions[k]).collect());
        let reduction = if m_off > 0.0 { 1.0 - m_on / m_off } else { 0.0 };
        pass &= m_on < m_off;
        if spec.critical {
            pass &= reduction >= 0.2;
        }
        parts.push(format!("{} {m_off:.3}->{m_on:.3}", spec.name));
    }
    let lower = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.critical_max < y.critical_max)
        .count();
    pass &= lower >= 18;
    outcome(pass, format!("{}; critical max lower in {lower}/20", parts.join(", ")))
}

fn chatter() -> Outcome {
    let s = scenario("tremor.toml");
    let windows = press_windows(&s);
    let seeds: Vec<u64> = (1..=20).collect();
    let per_seed = run_batch(&s, &seeds, Execution::Parallel, |log| {
        transitions_per_window(&log, &windows)
    })
    .unwrap();
    let touched = per_seed.iter().flatten().filter(|(_, t)| *t).count();
    let worst = per_seed.iter().flatten().map(|(n, _)| *n).max().unwrap_or(0);
    outcome(
        worst <= 4 && touched > 0,
        format!("worst {worst} transitions per episode over {touched} contact episodes"),
    )
}

fn determinism() -> Outcome {
    let s = scenario("aggressive.toml");
    let a = log_bytes(&run_seeded(&s, 7).unwrap());
    let b = log_bytes(&run_seeded(&s, 7).unwrap());
    let same_seed = a == b;

    let mut live = LiveSession::new(&scenario("live.toml"), 3, None).unwrap();
    for i in 0..1500 {
        let t = i as f64 * DT;
        let push = if t < 1.2 { [-0.6, -1.2, -0.8] } else { [0.0, 0.0, -0.9] };
        live.submit(SteerCommand {
            t,
            power: t > 2.0,
            ..SteerCommand::force(push)
        })
        .unwrap();
        live.advance_ticks(2).unwrap();
    }
    let recorded = live.finish();
    let mut bytes = Vec::new();
    recorded.write_binary(&mut bytes).unwrap();
    let saved = RunLog::read_binary(bytes.as_slice()).unwrap();
    let replayed = replay_log(&saved).unwrap();
    let replay_same = replayed.records == recorded.records && replayed.events == recorded.events;
    outcome(
        same_seed && replay_same,
        format!(
            "seeded bytes identical: {same_seed}; live replay identical: {replay_same} ({} records)",
            recorded.records.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 8] = [
        ("1 gain law", Duration::from_secs(1), gain_law),
        ("2 distance transform", Duration::from_secs(30), distance_transform),
        ("3 admittance", Duration::from_secs(10), admittance),
        ("4 registration and pivot", Duration::from_secs(10), setup_math),
        ("5 fixture proportions", Duration::from_secs(5), table2),
        ("6 controller efficacy", Duration::from_secs(300), efficacy),
        ("7 no chatter", Duration::from_secs(60), chatter),
        ("8 determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failed += usize::from(!pass);
        println!(
            "{} [{name}] {} ({:.2} s of {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
