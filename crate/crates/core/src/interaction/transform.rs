use crate::geometry::RigidTransform;
use crate::robot::{Frame, Wrench};

/// Re-expresses `w` through `to_from` (which maps `w.frame` coordinates into
/// the target frame): `f' = R·f`, `τ' = R·τ + t × (R·f)`.
pub fn transform_wrench(w: &Wrench, to_from: &RigidTransform, to: Frame) -> Wrench {
    let f = to_from.rotation() * w.force;
    let tau = to_from.rotation() * w.torque + to_from.translation().cross(&f);
    Wrench::new(f, tau, to)
}
