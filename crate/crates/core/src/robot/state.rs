use serde::{Deserialize, Serialize};

use super::chain::KinematicChain;
use crate::geometry::RigidTransform;
use crate::{Error, Result};

/// Joint state and the resulting drill-tip pose in the anatomy frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub q: Vec<f64>,
    /// Commanded joint rates over the last step.
    pub qdot: Vec<f64>,
    pub tip: RigidTransform,
    /// Joints pinned at a limit by the last step.
    pub at_limit: Vec<bool>,
}

impl RobotState {
    pub fn new(chain: &KinematicChain, q: Vec<f64>, anatomy_from_base: &RigidTransform) -> Result<Self> {
        if q.len() != chain.dof() {
            return Err(Error::InvalidArgument(format!(
                "initial joint vector has {} entries, chain has {} joints",
                q.len(),
                chain.dof()
            )));
        }
        if !chain.within_limits(&q) {
            return Err(Error::InvalidArgument("initial joint vector violates limits".into()));
        }
        let tip = anatomy_from_base.compose(&chain.forward_kinematics(&q));
        let m = q.len();
        Ok(RobotState {
            q,
            qdot: vec![0.0; m],
            tip,
            at_limit: vec![false; m],
        })
    }
}

/// `q ← clamp(q + q̇·dt·rate_scale, limits)` followed by forward kinematics.
pub fn integrate_step(
    chain: &KinematicChain,
    anatomy_from_base: &RigidTransform,
    state: &RobotState,
    qdot: &[f64],
    dt: f64,
    rate_scale: f64,
) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if qdot.len() != chain.dof() {
        return Err(Error::InvalidArgument(
            "joint-rate vector length does not match the chain".into(),
        ));
    }
    if qdot.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("joint rates"));
    }
    let mut q = state.q.clone();
    let mut at_limit = vec![false; q.len()];
    for (i, joint) in chain.joints().iter().enumerate() {
        let next = q[i] + qdot[i] * dt * rate_scale;
        if next <= joint.lower {
            q[i] = joint.lower;
            at_limit[i] = qdot[i] < 0.0 || next < joint.lower;
        } else if next >= joint.upper {
            q[i] = joint.upper;
            at_limit[i] = qdot[i] > 0.0 || next > joint.upper;
        } else {
            q[i] = next;
        }
    }
    let tip = anatomy_from_base.compose(&chain.forward_kinematics(&q));
    Ok(RobotState {
        q,
        qdot: qdot.to_vec(),
        tip,
        at_limit,
    })
}
