//! Robot kinematics and the admittance control solve.

mod admittance;
mod chain;
mod state;
mod wrench;

pub use admittance::{solve_admittance, GainMatrix, DEFAULT_DAMPING};
pub use chain::{ChainSpec, Joint, JointKind, KinematicChain};
pub use state::{integrate_step, RobotState};
pub use wrench::{Frame, Wrench};
