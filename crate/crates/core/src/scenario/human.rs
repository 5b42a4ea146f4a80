//! Scripted operator: hand-force segments, tremor and a simple reactive
//! force regulator.
//!
//! Press and sweep segments close the loop on the *true* contact force,
//! seen through a reaction delay, so what the operator tries to do does not
//! depend on whether the adaptive controller is enabled.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{from_array, Vec3};
use crate::interaction::{penetration_from_distance, MaterialParams};
use crate::robot::{Frame, Wrench};
use crate::twin::AnatomyModel;
use crate::{Error, Result};

/// RNG stream id of the tremor generator.
pub const TREMOR_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanParams {
    /// Delay between the contact force and the operator reacting to it (s).
    pub reaction_delay: f64,
    /// Push-force change per newton of force error.
    pub force_gain: f64,
    pub max_push: f64,
    pub max_pull: f64,
    /// N/mm, for approach and for staying on the press line.
    pub position_gain: f64,
    pub max_lateral: f64,
    pub approach_max: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        HumanParams {
            reaction_delay: 0.08,
            force_gain: 0.4,
            max_push: 6.0,
            max_pull: 1.0,
            position_gain: 1.0,
            max_lateral: 2.0,
            approach_max: 3.0,
        }
    }
}

impl HumanParams {
    pub fn validate(&self, problems: &mut Vec<String>) {
        let checks = [
            ("reaction_delay", self.reaction_delay >= 0.0),
            ("force_gain", self.force_gain > 0.0),
            ("max_push", self.max_push > 0.0),
            ("max_pull", self.max_pull >= 0.0),
            ("position_gain", self.position_gain > 0.0),
            ("max_lateral", self.max_lateral >= 0.0),
            ("approach_max", self.approach_max > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                problems.push(format!("input.human.{name} is out of range"));
            }
        }
    }
}

/// Band-limited hand tremor added to every axis of the hand force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TremorParams {
    /// Standard deviation per axis (N).
    pub std: f64,
    /// First-order low-pass corner (Hz).
    pub band_hz: f64,
    /// Mixed into the run seed.
    pub seed: u64,
}

impl Default for TremorParams {
    fn default() -> Self {
        TremorParams {
            std: 0.05,
            band_hz: 8.0,
            seed: 0,
        }
    }
}

impl TremorParams {
    pub fn validate(&self, problems: &mut Vec<String>) {
        if !(self.std >= 0.0) {
            problems.push(format!("input.tremor.std must be >= 0, got {}", self.std));
        }
        if !(self.band_hz > 0.0) {
            problems.push(format!("input.tremor.band_hz must be > 0, got {}", self.band_hz));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Move toward `target` under a saturated position law.
    Approach {
        duration: f64,
        target: [f64; 3],
        #[serde(default)]
        power: bool,
    },
    /// Push along `direction` through `point` until the contact force reaches
    /// `force`.
    Press {
        duration: f64,
        point: [f64; 3],
        direction: [f64; 3],
        force: f64,
        #[serde(default)]
        power: bool,
    },
    /// Press while the press line slides from `from` to `to`.
    Sweep {
        duration: f64,
        from: [f64; 3],
        to: [f64; 3],
        direction: [f64; 3],
        force: f64,
        #[serde(default)]
        power: bool,
    },
    /// Constant pull of `force` newtons along `direction`.
    Retract {
        duration: f64,
        direction: [f64; 3],
        force: f64,
    },
    /// Constant hand force (zero by default).
    Hold {
        duration: f64,
        #[serde(default)]
        force: [f64; 3],
        #[serde(default)]
        power: bool,
    },
    /// Zero-order-hold samples `[t, fx, fy, fz]`, `t` relative to the segment start.
    Table {
        duration: f64,
        samples: Vec<[f64; 4]>,
        #[serde(default)]
        power: bool,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Approach { duration, .. }
            | Segment::Press { duration, .. }
            | Segment::Sweep { duration, .. }
            | Segment::Retract { duration, .. }
            | Segment::Hold { duration, .. }
            | Segment::Table { duration, .. } => *duration,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Segment::Approach { .. } => "approach",
            Segment::Press { .. } => "press",
            Segment::Sweep { .. } => "sweep",
            Segment::Retract { .. } => "retract",
            Segment::Hold { .. } => "hold",
            Segment::Table { .. } => "table",
        }
    }

    pub fn power(&self) -> bool {
        match self {
            Segment::Approach { power, .. }
            | Segment::Press { power, .. }
            | Segment::Sweep { power, .. }
            | Segment::Hold { power, .. }
            | Segment::Table { power, .. } => *power,
            Segment::Retract { .. } => false,
        }
    }

    pub fn validate(&self, i: usize, problems: &mut Vec<String>) {
        let p = |m: &str| format!("input.segments[{i}] ({}): {m}", self.kind());
        let d = self.duration();
        if !(d > 0.0) || !d.is_finite() {
            problems.push(p(&format!("duration must be > 0, got {d}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let unit = |v: &[f64; 3]| from_array(*v).norm() > 1e-9;
        match self {
            Segment::Approach { target, .. } => {
                if !finite(target) {
                    problems.push(p("target must be finite"));
                }
            }
            Segment::Press {
                point,
                direction,
                force,
                ..
            } => {
                if !finite(point) {
                    problems.push(p("point must be finite"));
                }
                if !finite(direction) || !unit(direction) {
                    problems.push(p("direction must be a non-zero vector"));
                }
                if !(*force > 0.0) || !force.is_finite() {
                    problems.push(p("force must be > 0"));
                }
            }
            Segment::Sweep {
                from,
                to,
                direction,
                force,
                ..
            } => {
                if !finite(from) || !finite(to) {
                    problems.push(p("from/to must be finite"));
                }
                if !finite(direction) || !unit(direction) {
                    problems.push(p("direction must be a non-zero vector"));
                }
                if !(*force > 0.0) || !force.is_finite() {
                    problems.push(p("force must be > 0"));
                }
            }
            Segment::Retract { direction, force, .. } => {
                if !finite(direction) || !unit(direction) {
                    problems.push(p("direction must be a non-zero vector"));
                }
                if !(*force >= 0.0) || !force.is_finite() {
                    problems.push(p("force must be >= 0"));
                }
            }
            Segment::Hold { force, .. } => {
                if !finite(force) {
                    problems.push(p("force must be finite"));
                }
            }
            Segment::Table { samples, .. } => {
                if samples.iter().any(|s| !finite(s)) {
                    problems.push(p("samples must be finite"));
                }
                if samples.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    problems.push(p("sample times must be strictly increasing"));
                }
            }
        }
    }
}

/// What the operator can perceive each control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandObservation {
    pub t: f64,
    /// Tip position, anatomy frame.
    pub tip: Vec3,
    /// True contact force on the tool, anatomy frame.
    pub contact_force: Vec3,
}

/// Hand wrench (anatomy frame, at the tip) and drill power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandCommand {
    pub wrench: Wrench,
    pub power: bool,
}

impl HandCommand {
    pub fn idle() -> Self {
        HandCommand {
            wrench: Wrench::zero(Frame::World),
            power: false,
        }
    }
}

/// Source of hand force for the run loop; called once per control tick in
/// time order.
pub trait HandInput {
    fn command(&mut self, obs: &HandObservation) -> Result<HandCommand>;
}

#[derive(Clone, Debug)]
struct Tremor {
    a: f64,
    gain: f64,
    std: f64,
    state: Option<Vec3>,
    rng: ChaCha8Rng,
}

impl Tremor {
    fn new(p: &TremorParams, control_hz: f64, seed: u64) -> Self {
        let a = (-2.0 * std::f64::consts::PI * p.band_hz / control_hz).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p.seed.rotate_left(17));
        rng.set_stream(TREMOR_STREAM);
        Tremor {
            a,
            gain: (1.0 - a * a).sqrt(),
            std: p.std,
            state: None,
            rng,
        }
    }

    fn next(&mut self) -> Vec3 {
        let mut draw = || -> f64 { StandardNormal.sample(&mut self.rng) };
        let fresh = Vec3::new(draw(), draw(), draw()) * self.std;
        let x = match self.state {
            None => fresh,
            Some(prev) => prev * self.a + fresh * self.gain,
        };
        self.state = Some(x);
        x
    }
}

/// A scripted operator: segments laid end to end plus tremor.
#[derive(Clone, Debug)]
pub struct HandForceTrajectory {
    segments: Vec<(f64, Segment)>,
    end: f64,
    human: HumanParams,
    tremor: Option<Tremor>,
    seen: VecDeque<(f64, f64)>,
}

/// Builds the scripted operator. Deterministic in `(segments, tremor, seed)`.
pub fn generate_trajectory(
    segments: &[Segment],
    tremor: Option<&TremorParams>,
    human: &HumanParams,
    control_hz: f64,
    seed: u64,
) -> Result<HandForceTrajectory> {
    let mut problems = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        s.validate(i, &mut problems);
    }
    human.validate(&mut problems);
    if let Some(t) = tremor {
        t.validate(&mut problems);
    }
    if !(control_hz > 0.0) {
        problems.push("control rate must be > 0".into());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let mut t = 0.0;
    let mut laid = Vec::with_capacity(segments.len());
    for s in segments {
        laid.push((t, s.clone()));
        t += s.duration();
    }
    Ok(HandForceTrajectory {
        segments: laid,
        end: t,
        human: *human,
        tremor: tremor.filter(|p| p.std > 0.0).map(|p| Tremor::new(p, control_hz, seed)),
        seen: VecDeque::new(),
    })
}

impl HandForceTrajectory {
    pub fn end(&self) -> f64 {
        self.end
    }

    /// `(start, end, segment)` for every segment.
    pub fn windows(&self) -> Vec<(f64, f64, &Segment)> {
        self.segments
            .iter()
            .map(|(s, seg)| (*s, s + seg.duration(), seg))
            .collect()
    }

    pub fn segment_at(&self, t: f64) -> Option<(usize, f64, &Segment)> {
        if t >= self.end {
            return None;
        }
        let i = self.segments.partition_point(|(start, _)| *start <= t).checked_sub(1)?;
        let (start, seg) = &self.segments[i];
        Some((i, t - start, seg))
    }

    /// Contact force magnitude as perceived after the reaction delay.
    fn perceived(&mut self, t: f64, now: f64) -> f64 {
        self.seen.push_back((t, now));
        let cutoff = t - self.human.reaction_delay;
        while self.seen.len() > 1 && self.seen[1].0 <= cutoff + 1e-12 {
            self.seen.pop_front();
        }
        match self.seen.front() {
            Some(&(ts, f)) if ts <= cutoff + 1e-12 => f,
            _ => 0.0,
        }
    }

    fn push(&self, target: f64, felt: f64) -> f64 {
        (self.human.force_gain * (target - felt)).clamp(-self.human.max_pull, self.human.max_push)
    }

    fn line_force(&self, anchor: &Vec3, dir: &Vec3, tip: &Vec3) -> Vec3 {
        let off = anchor - tip;
        let lateral = off - dir * off.dot(dir);
        clamp_norm(lateral * self.human.position_gain, self.human.max_lateral)
    }
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max && n > 0.0 {
        v * (max / n)
    } else {
        v
    }
}

impl HandInput for HandForceTrajectory {
    fn command(&mut self, obs: &HandObservation) -> Result<HandCommand> {
        let felt = self.perceived(obs.t, obs.contact_force.norm());
        let tremor = match self.tremor.as_mut() {
            Some(tr) => tr.next(),
            None => Vec3::zeros(),
        };
        let Some((_, local, seg)) = self.segment_at(obs.t) else {
            return Ok(HandCommand {
                wrench: Wrench::force_only(tremor, Frame::World),
                power: false,
            });
        };
        let force = match seg {
            Segment::Approach { target, .. } => clamp_norm(
                (from_array(*target) - obs.tip) * self.human.position_gain,
                self.human.approach_max,
            ),
            Segment::Press {
                point,
                direction,
                force,
                ..
            } => {
                let d = from_array(*direction).normalize();
                d * self.push(*force, felt) + self.line_force(&from_array(*point), &d, &obs.tip)
            }
            Segment::Sweep {
                duration,
                from,
                to,
                direction,
                force,
                ..
            } => {
                let d = from_array(*direction).normalize();
                let s = (local / duration).clamp(0.0, 1.0);
                let anchor = from_array(*from) * (1.0 - s) + from_array(*to) * s;
                d * self.push(*force, felt) + self.line_force(&anchor, &d, &obs.tip)
            }
            Segment::Retract { direction, force, .. } => from_array(*direction).normalize() * *force,
            Segment::Hold { force, .. } => from_array(*force),
            Segment::Table { samples, .. } => {
                let i = samples.partition_point(|s| s[0] <= local);
                match i.checked_sub(1) {
                    Some(i) => Vec3::new(samples[i][1], samples[i][2], samples[i][3]),
                    None => Vec3::zeros(),
                }
            }
        };
        Ok(HandCommand {
            wrench: Wrench::force_only(force + tremor, Frame::World),
            power: seg.power(),
        })
    }
}

/// Largest static contact force reachable along a press line, ignoring
/// drilling: sum of `k·penetration` over structures, maximised along the ray.
pub fn max_static_force(anatomy: &AnatomyModel, point: &Vec3, direction: &Vec3, reach: f64) -> f64 {
    let d = direction.normalize();
    let h = anatomy.volume().min_spacing();
    let step = 0.25 * h;
    let n = (reach / step).ceil() as usize;
    let sdf = anatomy.sdf();
    let mut best: f64 = 0.0;
    // Start a little behind the point so a point placed on the surface works.
    for i in 0..=n {
        let p = point + d * (i as f64 * step - 2.0 * h);
        let (_, out) = sdf.clamp(&p);
        if out {
            continue;
        }
        let q = anatomy.query(&p);
        let f: f64 = q
            .distances
            .iter()
            .enumerate()
            .map(|(pos, &dist)| anatomy.spec_at(pos).stiffness * penetration_from_distance(dist, 0.5 * h))
            .sum();
        best = best.max(f);
    }
    best
}

/// First structure a press line enters, if any.
fn first_hit(anatomy: &AnatomyModel, point: &Vec3, direction: &Vec3, reach: f64) -> Option<usize> {
    let d = direction.normalize();
    let h = anatomy.volume().min_spacing();
    let step = 0.25 * h;
    let n = (reach / step).ceil() as usize;
    (0..=n).find_map(|i| {
        let p = point + d * (i as f64 * step - 2.0 * h);
        let q = anatomy.query(&p);
        q.distances
            .iter()
            .position(|&dist| penetration_from_distance(dist, 0.5 * h) > 0.0)
    })
}

/// Rejects press and sweep segments whose target force the anatomy cannot
/// produce: the line misses everything, or the target exceeds what the
/// structures along it can push back without being drilled away.
pub fn check_reachable(segments: &[Segment], anatomy: &AnatomyModel, materials: &MaterialParams) -> Result<()> {
    const REACH: f64 = 40.0;
    let mut problems = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let (point, direction, force, power) = match seg {
            Segment::Press {
                point,
                direction,
                force,
                power,
                ..
            } => (from_array(*point), from_array(*direction), *force, *power),
            Segment::Sweep {
                from,
                direction,
                force,
                power,
                ..
            } => (from_array(*from), from_array(*direction), *force, *power),
            _ => continue,
        };
        let Some(hit) = first_hit(anatomy, &point, &direction, REACH) else {
            problems.push(format!(
                "input.segments[{i}] ({}): press line hits no structure",
                seg.kind()
            ));
            continue;
        };
        let carvable = power && !anatomy.spec_at(hit).critical && materials.removal_rate > 0.0;
        if carvable {
            continue;
        }
        let max = max_static_force(anatomy, &point, &direction, REACH);
        if force > max {
            problems.push(format!(
                "input.segments[{i}] ({}): target {force} N unreachable, at most {max:.3} N along the press line",
                seg.kind()
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: f64) -> HandObservation {
        HandObservation {
            t,
            tip: Vec3::zeros(),
            contact_force: Vec3::zeros(),
        }
    }

    #[test]
    fn empty_spec_is_zero_force() {
        let mut tr = generate_trajectory(&[], None, &HumanParams::default(), 500.0, 1).unwrap();
        for i in 0..10 {
            let c = tr.command(&obs(i as f64 * 0.002)).unwrap();
            assert_eq!(c.wrench.force, Vec3::zeros());
            assert!(!c.power);
        }
    }

    #[test]
    fn tremor_is_reproducible_and_scaled() {
        let p = TremorParams {
            std: 0.05,
            band_hz: 8.0,
            seed: 0,
        };
        let run = |seed| {
            let mut tr = generate_trajectory(&[], Some(&p), &HumanParams::default(), 500.0, seed).unwrap();
            (0..20_000)
                .map(|i| tr.command(&obs(i as f64 * 0.002)).unwrap().wrench.force.x)
                .collect::<Vec<_>>()
        };
        let a = run(4);
        assert_eq!(a, run(4));
        assert_ne!(a, run(5));
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.01, "{}", var.sqrt());
    }

    #[test]
    fn segments_are_laid_end_to_end() {
        let segs = vec![
            Segment::Hold {
                duration: 1.0,
                force: [1.0, 0.0, 0.0],
                power: false,
            },
            Segment::Retract {
                duration: 0.5,
                direction: [0.0, 0.0, 1.0],
                force: 2.0,
            },
        ];
        let mut tr = generate_trajectory(&segs, None, &HumanParams::default(), 500.0, 0).unwrap();
        assert_eq!(tr.end(), 1.5);
        assert_eq!(tr.command(&obs(0.999)).unwrap().wrench.force, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(tr.command(&obs(1.0)).unwrap().wrench.force, Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(tr.command(&obs(1.5)).unwrap().wrench.force, Vec3::zeros());
    }

    #[test]
    fn table_is_zero_order_hold() {
        let segs = vec![Segment::Table {
            duration: 1.0,
            samples: vec![[0.1, 1.0, 0.0, 0.0], [0.5, 2.0, 0.0, 0.0]],
            power: true,
        }];
        let mut tr = generate_trajectory(&segs, None, &HumanParams::default(), 500.0, 0).unwrap();
        assert_eq!(tr.command(&obs(0.0)).unwrap().wrench.force.x, 0.0);
        assert_eq!(tr.command(&obs(0.3)).unwrap().wrench.force.x, 1.0);
        let c = tr.command(&obs(0.7)).unwrap();
        assert_eq!(c.wrench.force.x, 2.0);
        assert!(c.power);
    }

    #[test]
    fn rejects_bad_segments() {
        let segs = vec![Segment::Press {
            duration: 0.0,
            point: [0.0; 3],
            direction: [0.0; 3],
            force: -1.0,
            power: false,
        }];
        match generate_trajectory(&segs, None, &HumanParams::default(), 500.0, 0) {
            Err(Error::Validation(p)) => assert_eq!(p.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
