//! Digital-twin simulator and situational-aware adaptive force control for
//! cooperative (hand-over-hand) surgical drilling.
//!
//! The crate is organised around the control loop of a cooperatively
//! controlled drilling robot:
//!
//! - [`twin`]: labeled voxel anatomy, per-structure signed distance fields,
//!   bone removal, point-set registration and pivot calibration.
//! - [`robot`]: serial-chain kinematics and the damped least-squares
//!   admittance solve.
//! - [`interaction`]: penalty contact forces, wrench transforms, simulated
//!   force sensors and drilling ablation.
//! - [`controller`]: contact detection, operating-structure estimation and
//!   the three-regime adaptive gain.
//! - [`scenario`]: scenario files, hand-force scripting, the multi-rate run
//!   loop, run logs and safety metrics.
//!
//! Data-parallel work (distance transforms, batch runs) goes through
//! [`exec::Execution`]; with the `parallel` feature disabled every path runs
//! sequentially.

// Parameter checks write `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod interaction;
pub mod robot;
pub mod scenario;
pub mod twin;

pub use error::{Error, Result};
