//! Scenario files (TOML).
//!
//! ```toml
//! name = "press-nerve"
//! duration = 4.0
//! seed = 7
//!
//! [rates]
//! sim_hz = 1000.0
//! control_hz = 500.0
//!
//! [anatomy]
//! phantom = { dims = [72, 72, 72], spacing = 0.25 }
//! # file = "anatomy.dtv"      (binary labeled volume, structures in the file
//! #                             or a `.structures.json` sidecar)
//!
//! [robot]
//! start_tip = [9.0, 9.0, 9.0]
//! # chain = "arm.json"
//!
//! [controller]
//! enabled = true
//!
//! [input]
//! kind = "scripted"
//! [[input.segments]]
//! type = "press"
//! duration = 2.0
//! point = [9.0, 9.0, 7.0]
//! direction = [0.0, 0.0, -1.0]
//! force = 1.0
//! ```
//!
//! Relative paths resolve against the scenario file's directory. Every
//! section except `[input]` is optional and falls back to the defaults
//! printed by `drilltwin describe`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::human::{HumanParams, Segment, TremorParams};
use crate::controller::ControllerParams;
use crate::error::io_at;
use crate::exec::Execution;
use crate::geometry::PoseSpec;
use crate::interaction::{MaterialParams, SensorModel};
use crate::robot::{KinematicChain, DEFAULT_DAMPING};
use crate::twin::{generate_phantom, load_volume, AnatomyModel, PhantomSpec, StructureSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub sim_hz: f64,
    pub control_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            sim_hz: 1000.0,
            control_hz: 500.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnatomySource {
    pub phantom: Option<PhantomSpec>,
    pub file: Option<PathBuf>,
    /// Replaces the structure table shipped with the volume.
    pub structures: Option<Vec<StructureSpec>>,
}

impl Default for AnatomySource {
    fn default() -> Self {
        AnatomySource {
            phantom: Some(PhantomSpec::default()),
            file: None,
            structures: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// Chain definition (JSON); the built-in 6-DOF arm when absent.
    pub chain: Option<PathBuf>,
    /// Overrides the chain's admittance gains.
    pub gains: Option<[f64; 6]>,
    /// DLS damping μ.
    pub damping: f64,
    /// Initial joint vector; zeros when absent.
    pub initial_q: Option<Vec<f64>>,
    /// Anatomy-frame position of the tip at start. When `registration` is
    /// absent the base is placed (translation only) to put it there.
    pub start_tip: [f64; 3],
    /// Explicit `anatomy_from_base` transform.
    pub registration: Option<PoseSpec>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            chain: None,
            gains: None,
            damping: DEFAULT_DAMPING,
            initial_q: None,
            start_tip: [9.0, 9.0, 10.0],
            registration: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub drill: SensorModel,
    pub wrist: SensorModel,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            drill: SensorModel::drill_default(),
            wrist: SensorModel::wrist_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    Scripted {
        #[serde(default)]
        segments: Vec<Segment>,
        #[serde(default)]
        tremor: Option<TremorParams>,
        #[serde(default)]
        human: HumanParams,
    },
    /// Hand force and drill power re-applied from a recorded run log.
    Replay { log: PathBuf },
    /// Hand force streamed by a connected client.
    Live {
        #[serde(default = "default_max_force")]
        max_force: f64,
        #[serde(default = "default_deadman")]
        deadman_timeout: f64,
        #[serde(default = "default_snapshot_hz")]
        snapshot_hz: f64,
    },
}

fn default_max_force() -> f64 {
    15.0
}
fn default_deadman() -> f64 {
    0.2
}
fn default_snapshot_hz() -> f64 {
    60.0
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Scripted {
            segments: Vec::new(),
            tremor: None,
            human: HumanParams::default(),
        }
    }
}

impl InputSource {
    pub fn live_default() -> Self {
        InputSource::Live {
            max_force: default_max_force(),
            deadman_timeout: default_deadman(),
            snapshot_hz: default_snapshot_hz(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InputSource::Scripted { .. } => "scripted",
            InputSource::Replay { .. } => "replay",
            InputSource::Live { .. } => "live",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seconds of simulated time.
    pub duration: f64,
    pub seed: u64,
    pub rates: Rates,
    pub anatomy: AnatomySource,
    pub robot: RobotConfig,
    pub controller: ControllerParams,
    pub sensors: SensorConfig,
    pub materials: MaterialParams,
    pub input: InputSource,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "unnamed".into(),
            duration: 0.0,
            seed: 0,
            rates: Rates::default(),
            anatomy: AnatomySource::default(),
            robot: RobotConfig::default(),
            controller: ControllerParams::default(),
            sensors: SensorConfig::default(),
            materials: MaterialParams::default(),
            input: InputSource::default(),
            base_dir: None,
        }
    }
}

/// Integer ratio `a / b`, if it is one.
fn divides(a: f64, b: f64) -> Option<u64> {
    if !(a > 0.0 && b > 0.0) {
        return None;
    }
    let r = a / b;
    let n = r.round();
    ((r - n).abs() < 1e-9 && n >= 1.0).then_some(n as u64)
}

impl Scenario {
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text)?;
        s.base_dir = base_dir.map(Path::to_path_buf);
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_at(path, e))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            problems.push(format!("duration must be >= 0, got {}", self.duration));
        }
        let r = &self.rates;
        if !(r.sim_hz > 0.0) {
            problems.push(format!("rates.sim_hz must be > 0, got {}", r.sim_hz));
        }
        if !(r.control_hz > 0.0) {
            problems.push(format!("rates.control_hz must be > 0, got {}", r.control_hz));
        }
        if r.control_hz > r.sim_hz {
            problems.push("rates.control_hz must not exceed rates.sim_hz".into());
        } else if divides(r.sim_hz, r.control_hz).is_none() {
            problems.push("rates.control_hz must divide rates.sim_hz evenly".into());
        }
        for (name, s) in [("drill", &self.sensors.drill), ("wrist", &self.sensors.wrist)] {
            s.validate(name, &mut problems);
            if s.rate_hz > r.control_hz {
                problems.push(format!("sensors.{name}.rate_hz must not exceed rates.control_hz"));
            } else if divides(r.sim_hz, s.rate_hz).is_none() {
                problems.push(format!("sensors.{name}.rate_hz must divide rates.sim_hz evenly"));
            }
        }
        match (&self.anatomy.phantom, &self.anatomy.file) {
            (Some(_), Some(_)) => problems.push("anatomy: give either phantom or file, not both".into()),
            (None, None) => problems.push("anatomy: one of phantom or file is required".into()),
            (Some(p), None) => {
                if p.dims.iter().any(|d| *d < 2) {
                    problems.push("anatomy.phantom.dims must all be >= 2".into());
                }
                if !(p.spacing > 0.0) {
                    problems.push("anatomy.phantom.spacing must be > 0".into());
                }
                if !(p.jitter >= 0.0) {
                    problems.push("anatomy.phantom.jitter must be >= 0".into());
                }
            }
            (None, Some(f)) => {
                if !self.resolve(f).exists() {
                    problems.push(format!("anatomy.file: {} does not exist", f.display()));
                }
            }
        }
        if let Some(chain) = &self.robot.chain {
            if !self.resolve(chain).exists() {
                problems.push(format!("robot.chain: {} does not exist", chain.display()));
            }
        }
        if let Some(g) = &self.robot.gains {
            if g.iter().any(|v| !(*v > 0.0)) {
                problems.push("robot.gains must all be > 0".into());
            }
        }
        if !(self.robot.damping >= 0.0) || !self.robot.damping.is_finite() {
            problems.push(format!("robot.damping must be >= 0, got {}", self.robot.damping));
        }
        if self.robot.start_tip.iter().any(|v| !v.is_finite()) {
            problems.push("robot.start_tip must be finite".into());
        }
        self.controller.validate(&mut problems);
        self.materials.validate(&mut problems);
        match &self.input {
            InputSource::Scripted {
                segments,
                tremor,
                human,
            } => {
                for (i, s) in segments.iter().enumerate() {
                    s.validate(i, &mut problems);
                }
                if let Some(t) = tremor {
                    t.validate(&mut problems);
                }
                human.validate(&mut problems);
            }
            InputSource::Replay { log } => {
                if !self.resolve(log).exists() {
                    problems.push(format!("input.log: {} does not exist", log.display()));
                }
            }
            InputSource::Live {
                max_force,
                deadman_timeout,
                snapshot_hz,
            } => {
                if !(*max_force > 0.0) {
                    problems.push("input.max_force must be > 0".into());
                }
                if !(*deadman_timeout > 0.0) {
                    problems.push("input.deadman_timeout must be > 0".into());
                }
                if !(*snapshot_hz > 0.0) {
                    problems.push("input.snapshot_hz must be > 0".into());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn sim_dt(&self) -> f64 {
        1.0 / self.rates.sim_hz
    }

    pub fn control_divisor(&self) -> u64 {
        divides(self.rates.sim_hz, self.rates.control_hz).unwrap_or(1)
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration * self.rates.sim_hz).round() as u64
    }

    /// SHA-256 of the scenario's canonical JSON form.
    pub fn config_hash(&self) -> String {
        hash_json(self)
    }

    /// Hash of everything except the controller enable switch, so the two
    /// arms of an on/off comparison share it.
    pub fn comparison_hash(&self) -> String {
        let mut s = self.clone();
        s.controller.enabled = true;
        hash_json(&s)
    }

    pub fn build_anatomy(&self, exec: Execution) -> Result<AnatomyModel> {
        let (volume, specs) = match (&self.anatomy.phantom, &self.anatomy.file) {
            (Some(p), _) => {
                let (v, s, _) = generate_phantom(p)?;
                (v, s)
            }
            (None, Some(f)) => load_volume(&self.resolve(f))?,
            (None, None) => return Err(Error::Config("anatomy source missing".into())),
        };
        let specs = self.anatomy.structures.clone().unwrap_or(specs);
        volume.check_labels(&specs)?;
        AnatomyModel::with_execution(volume, specs, exec)
    }

    pub fn build_chain(&self) -> Result<KinematicChain> {
        let mut spec = match &self.robot.chain {
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| io_at(&path, e))?;
                serde_json::from_str(&text)?
            }
            None => KinematicChain::default_spec(),
        };
        if let Some(g) = self.robot.gains {
            spec.gains = g;
        }
        KinematicChain::from_spec(spec)
    }
}

fn hash_json<T: Serialize>(v: &T) -> String {
    let json = serde_json::to_vec(v).expect("scenario serialises");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_section_is_valid() {
        let s = Scenario::from_toml_str("[input]\nkind = \"scripted\"\n", None).unwrap();
        assert_eq!(s.rates.sim_hz, 1000.0);
        assert_eq!(s.total_ticks(), 0);
    }

    #[test]
    fn enumerates_every_problem() {
        let text = r#"
duration = -1.0
[rates]
sim_hz = 1000.0
control_hz = 300.0
[controller]
sigma_low = 0.9
eta = 0.0
[materials]
burr_radius = 0.0
"#;
        match Scenario::from_toml_str(text, None) {
            Err(Error::Validation(p)) => {
                assert!(p.len() >= 5, "{p:?}");
                assert!(p.iter().any(|m| m.starts_with("duration")));
                assert!(p.iter().any(|m| m.contains("control_hz")));
                assert!(p.iter().any(|m| m.contains("eta")));
                assert!(p.iter().any(|m| m.contains("burr_radius")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comparison_hash_ignores_enable() {
        let a = Scenario::default();
        let mut b = a.clone();
        b.controller.enabled = false;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.comparison_hash(), b.comparison_hash());
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::default();
        let back = Scenario::from_toml_str(&s.to_toml().unwrap(), None).unwrap();
        assert_eq!(s, back);
    }
}
