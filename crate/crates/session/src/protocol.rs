//! Wire messages. Every message is one JSON text frame carrying the schema
//! version `v` and a `type` tag.
//!
//! Client to server: `steer`, `bye`.
//! Server to client: `hello`, `snapshot`, `event`, `error`, `bye`.

use drilltwin::controller::{ControllerParams, Regime};
use drilltwin::scenario::{LogEvent, SimSnapshot};
use drilltwin::twin::StructureSpec;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u16 = 1;

/// Upper bound on any server message.
pub const MAX_MESSAGE_BYTES: usize = 64 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Steer(SteerCommand),
    /// Ends the session; the server answers with its own `bye`.
    Bye,
}

/// Hand force request from the operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerCommand {
    /// Client clock (s); informational only.
    #[serde(default)]
    pub t: f64,
    /// Hand force in the anatomy frame (N).
    pub force: [f64; 3],
    /// Hand torque in the anatomy frame (N·mm).
    #[serde(default)]
    pub torque: [f64; 3],
    #[serde(default)]
    pub power: bool,
}

impl SteerCommand {
    pub fn force(force: [f64; 3]) -> Self {
        SteerCommand {
            t: 0.0,
            force,
            torque: [0.0; 3],
            power: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.force.iter().chain(&self.torque).all(|v| v.is_finite())
    }

    /// Clamps every force and torque component to `±max`.
    pub fn clamped(mut self, max: f64) -> Self {
        for v in self.force.iter_mut().chain(self.torque.iter_mut()) {
            *v = v.clamp(-max, max);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    Snapshot(SessionSnapshot),
    /// Controller, carve and boundary events. Never decimated.
    Event {
        t: f64,
        event: LogEvent,
    },
    Error {
        code: String,
        message: String,
    },
    Bye {
        reason: String,
        t: f64,
        records: usize,
    },
}

/// Wrapper adding the version field on the wire.
#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u16,
    #[serde(flatten)]
    body: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub scenario: String,
    pub seed: u64,
    pub structures: Vec<StructureSpec>,
    pub controller: ControllerParams,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub sim_hz: f64,
    pub control_hz: f64,
    pub snapshot_hz: f64,
    pub max_force: f64,
    pub deadman_timeout: f64,
    /// Session length limit (s); zero means open-ended.
    pub duration: f64,
}

/// Anatomy cross-section the client should draw: the axial plane through the
/// tip, at grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceDescriptor {
    pub axis: char,
    /// Voxel index along `axis`.
    pub index: usize,
    /// Plane position (mm).
    pub position: f64,
    pub resolution: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub t: f64,
    pub tip: [f64; 3],
    /// Signed distance per structure (mm, structure order of `hello`); null
    /// for structures absent from the anatomy.
    pub distances: Vec<Option<f64>>,
    /// True tip contact force magnitude (N).
    pub force: f64,
    /// Controller's force estimate (N).
    pub force_estimate: f64,
    pub hand_force: [f64; 3],
    pub sigma: f64,
    pub regime: Regime,
    pub structure: Option<u8>,
    pub carved_voxels: usize,
    pub slice: SliceDescriptor,
}

impl SessionSnapshot {
    pub fn from_sim(s: &SimSnapshot, dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Self {
        let k = ((s.tip.z - origin[2]) / spacing[2])
            .round()
            .clamp(0.0, (dims[2] - 1) as f64) as usize;
        SessionSnapshot {
            t: s.t,
            tip: [s.tip.x, s.tip.y, s.tip.z],
            distances: s.distances.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            force: s.contact_force.norm(),
            force_estimate: s.estimated_force,
            hand_force: [s.hand_force.x, s.hand_force.y, s.hand_force.z],
            sigma: s.sigma,
            regime: s.regime,
            structure: s.structure,
            carved_voxels: s.carved_voxels,
            slice: SliceDescriptor {
                axis: 'z',
                index: k,
                position: origin[2] + k as f64 * spacing[2],
                resolution: [dims[0], dims[1]],
            },
        }
    }
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            body: self,
        })
        .expect("server messages always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        parse(text)
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl ClientMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            v: PROTOCOL_VERSION,
            body: self,
        })
        .expect("client messages always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        parse(text)
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
    match raw.get("v").and_then(|v| v.as_u64()) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        Some(v) => return Err(format!("unsupported protocol version {v}, expected {PROTOCOL_VERSION}")),
        None => return Err("missing protocol version field 'v'".into()),
    }
    let env: Envelope<T> = serde_json::from_value(raw).map_err(|e| e.to_string())?;
    Ok(env.body)
}
