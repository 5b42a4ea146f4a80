use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::{Error, Result};

/// Frame a wrench is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Tip,
    Wrist,
    DrillSensor,
    /// The anatomy (twin) frame.
    World,
}

/// Force (N) and torque (N·mm) about the frame origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub frame: Frame,
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3, frame: Frame) -> Self {
        Wrench { force, torque, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Wrench::new(Vec3::zeros(), Vec3::zeros(), frame)
    }

    pub fn force_only(force: Vec3, frame: Frame) -> Self {
        Wrench::new(force, Vec3::zeros(), frame)
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn force_magnitude(&self) -> f64 {
        self.force.norm()
    }

    /// `[force; torque]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn to_array(&self) -> [f64; 6] {
        let v = self.to_vector();
        [v[0], v[1], v[2], v[3], v[4], v[5]]
    }

    pub fn from_array(a: [f64; 6], frame: Frame) -> Self {
        Wrench::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]), frame)
    }
}
