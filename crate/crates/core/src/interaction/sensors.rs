//! Force sensors sampled at their own rate with zero-order hold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::transform::transform_wrench;
use crate::geometry::{PoseSpec, RigidTransform, Vec3};
use crate::robot::{Frame, Wrench};

/// Stream ids used to key per-sensor RNGs.
pub const DRILL_SENSOR_ID: u64 = 1;
pub const WRIST_SENSOR_ID: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub rate_hz: f64,
    /// Per-axis force noise std (N); torque noise scales with `torque_noise_ratio` (mm).
    pub noise_std: f64,
    pub torque_noise_ratio: f64,
    /// Std of the bias random walk per √s (N/√s).
    pub bias_drift: f64,
    /// Sensor frame expressed in the tip frame (`tip_from_sensor`).
    pub mounting: PoseSpec,
}

impl SensorModel {
    pub fn drill_default() -> Self {
        SensorModel {
            rate_hz: 200.0,
            noise_std: 0.01,
            torque_noise_ratio: 1.0,
            bias_drift: 0.0,
            mounting: PoseSpec {
                translation: [0.0, 0.0, 25.0],
                rpy_deg: [0.0; 3],
            },
        }
    }

    pub fn wrist_default() -> Self {
        SensorModel {
            rate_hz: 200.0,
            noise_std: 0.02,
            torque_noise_ratio: 1.0,
            bias_drift: 0.0,
            mounting: PoseSpec {
                translation: [0.0, 0.0, 120.0],
                rpy_deg: [0.0; 3],
            },
        }
    }

    pub fn validate(&self, name: &str, problems: &mut Vec<String>) {
        if !(self.rate_hz > 0.0) {
            problems.push(format!("sensors.{name}.rate_hz must be > 0, got {}", self.rate_hz));
        }
        if !(self.noise_std >= 0.0) {
            problems.push(format!("sensors.{name}.noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(self.torque_noise_ratio >= 0.0) {
            problems.push(format!("sensors.{name}.torque_noise_ratio must be >= 0"));
        }
        if !(self.bias_drift >= 0.0) {
            problems.push(format!(
                "sensors.{name}.bias_drift must be >= 0, got {}",
                self.bias_drift
            ));
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel::drill_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub wrench: Wrench,
}

/// A sampled sensor: noise stream, bias state and the held sample.
#[derive(Clone, Debug)]
pub struct SensorChannel {
    model: SensorModel,
    frame: Frame,
    tip_from_sensor: RigidTransform,
    sensor_from_tip: RigidTransform,
    rng: ChaCha8Rng,
    bias: [f64; 6],
    held: Option<Sample>,
    samples_taken: u64,
}

impl SensorChannel {
    pub fn new(model: SensorModel, frame: Frame, seed: u64, sensor_id: u64) -> Self {
        let tip_from_sensor = model.mounting.to_transform();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sensor_id);
        SensorChannel {
            model,
            frame,
            sensor_from_tip: tip_from_sensor.inverse(),
            tip_from_sensor,
            rng,
            bias: [0.0; 6],
            held: None,
            samples_taken: 0,
        }
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    pub fn tip_from_sensor(&self) -> &RigidTransform {
        &self.tip_from_sensor
    }

    /// Instant of the `n`-th sample. Computed from the index so sample times
    /// do not accumulate rounding error.
    fn sample_time(&self, n: u64) -> f64 {
        n as f64 / self.model.rate_hz
    }

    /// Takes a new sample if one is due at `t`; returns whether it did.
    /// `true_tip` is the wrench this sensor observes, expressed at the tip.
    pub fn update(&mut self, t: f64, true_tip: &Wrench) -> bool {
        let due = self.sample_time(self.samples_taken);
        // Tolerance keeps exact multiples of the sim step from slipping a tick.
        if t + 1e-9 < due {
            return false;
        }
        let dt = match self.held {
            Some(s) => t - s.t,
            None => 0.0,
        };
        if self.model.bias_drift > 0.0 && dt > 0.0 {
            let walk = Normal::new(0.0, self.model.bias_drift * dt.sqrt()).expect("finite std");
            for b in self.bias.iter_mut() {
                *b += walk.sample(&mut self.rng);
            }
        }
        let mut w = transform_wrench(true_tip, &self.sensor_from_tip, self.frame).to_array();
        if self.model.noise_std > 0.0 {
            let f = Normal::new(0.0, self.model.noise_std).expect("finite std");
            let tq = Normal::new(0.0, self.model.noise_std * self.model.torque_noise_ratio).expect("finite std");
            for (i, v) in w.iter_mut().enumerate() {
                *v += if i < 3 {
                    f.sample(&mut self.rng)
                } else {
                    tq.sample(&mut self.rng)
                };
            }
        }
        for (v, b) in w.iter_mut().zip(self.bias) {
            *v += b;
        }
        self.held = Some(Sample {
            t,
            wrench: Wrench::from_array(w, self.frame),
        });
        self.samples_taken += 1;
        while self.sample_time(self.samples_taken) <= t + 1e-9 {
            self.samples_taken += 1;
        }
        true
    }

    /// Held sample (sensor frame).
    pub fn held(&self) -> Option<&Sample> {
        self.held.as_ref()
    }

    pub fn is_stale(&self, t: f64) -> bool {
        match self.held {
            Some(s) => t - s.t > 2.0 * self.model.period() + 1e-9,
            None => true,
        }
    }
}

/// Tip-force estimate handed to the controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TipForceEstimate {
    /// Tip frame.
    pub wrench: Wrench,
    pub sample_t: f64,
    pub stale: bool,
}

impl TipForceEstimate {
    pub fn magnitude(&self) -> f64 {
        self.wrench.force.norm()
    }
}

/// Maps the held drill-sensor sample back to the tip frame. This inverse
/// transform is a stand-in for whatever estimator a real system uses.
pub fn estimate_tip_force(drill: &SensorChannel, t: f64) -> TipForceEstimate {
    match drill.held() {
        Some(s) => TipForceEstimate {
            wrench: transform_wrench(&s.wrench, drill.tip_from_sensor(), Frame::Tip),
            sample_t: s.t,
            stale: drill.is_stale(t),
        },
        None => TipForceEstimate {
            wrench: Wrench::zero(Frame::Tip),
            sample_t: f64::NEG_INFINITY,
            stale: true,
        },
    }
}

/// Drill and wrist sensors of one run.
#[derive(Clone, Debug)]
pub struct SensorSuite {
    pub drill: SensorChannel,
    pub wrist: SensorChannel,
}

impl SensorSuite {
    pub fn new(drill: SensorModel, wrist: SensorModel, seed: u64) -> Self {
        SensorSuite {
            drill: SensorChannel::new(drill, Frame::DrillSensor, seed, DRILL_SENSOR_ID),
            wrist: SensorChannel::new(wrist, Frame::Wrist, seed, WRIST_SENSOR_ID),
        }
    }

    /// `tip_force` is the contact force on the tool and `hand` the operator's
    /// wrench, both at the tip in the tip frame.
    pub fn simulate(&mut self, t: f64, tip_force: &Wrench, hand: &Wrench) {
        self.drill.update(t, tip_force);
        let total = Wrench::new(hand.force + tip_force.force, hand.torque + tip_force.torque, Frame::Tip);
        self.wrist.update(t, &total);
    }

    pub fn estimate(&self, t: f64) -> TipForceEstimate {
        estimate_tip_force(&self.drill, t)
    }
}

/// Force-only helper for tests and tools.
pub fn tip_wrench(force: Vec3) -> Wrench {
    Wrench::force_only(force, Frame::Tip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(rate: f64) -> SensorModel {
        SensorModel {
            rate_hz: rate,
            noise_std: 0.0,
            torque_noise_ratio: 1.0,
            bias_drift: 0.0,
            mounting: PoseSpec::default(),
        }
    }

    #[test]
    fn identity_pipeline_at_sample_instants() {
        let mut ch = SensorChannel::new(quiet(200.0), Frame::DrillSensor, 3, DRILL_SENSOR_ID);
        for tick in 0..100 {
            let t = tick as f64 * 1e-3;
            let f = tip_wrench(Vec3::new(t.sin(), 0.5, -t));
            if ch.update(t, &f) {
                let est = estimate_tip_force(&ch, t);
                assert!((est.wrench.force - f.force).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn samples_every_fifth_tick() {
        let mut ch = SensorChannel::new(quiet(200.0), Frame::DrillSensor, 3, DRILL_SENSOR_ID);
        let taken: Vec<usize> = (0..20)
            .filter(|&tick| ch.update(tick as f64 * 1e-3, &tip_wrench(Vec3::x() * tick as f64)))
            .collect();
        assert_eq!(taken, vec![0, 5, 10, 15]);
    }

    #[test]
    fn staleness() {
        let mut ch = SensorChannel::new(quiet(200.0), Frame::DrillSensor, 3, DRILL_SENSOR_ID);
        assert!(ch.is_stale(0.0));
        ch.update(0.0, &tip_wrench(Vec3::x()));
        assert!(!ch.is_stale(0.01));
        assert!(ch.is_stale(0.0101));
    }

    #[test]
    fn streams_differ_per_sensor() {
        let m = SensorModel {
            noise_std: 1.0,
            ..quiet(200.0)
        };
        let mut a = SensorChannel::new(m, Frame::DrillSensor, 9, DRILL_SENSOR_ID);
        let mut b = SensorChannel::new(m, Frame::Wrist, 9, WRIST_SENSOR_ID);
        let z = tip_wrench(Vec3::zeros());
        a.update(0.0, &z);
        b.update(0.0, &z);
        assert_ne!(a.held().unwrap().wrench.force, b.held().unwrap().wrench.force);
    }
}
