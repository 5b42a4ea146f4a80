//! Tool–tissue interaction: contact forces, force sensors and ablation.

mod ablation;
mod contact;
mod sensors;
mod transform;

pub use ablation::{ablate, CarveEvent};
pub use contact::{
    compute_contact_force, penalty_force, penetration_from_distance, ContactModel, ContactResult, MaterialContact,
    MaterialParams,
};
pub use sensors::{
    estimate_tip_force, tip_wrench, Sample, SensorChannel, SensorModel, SensorSuite, TipForceEstimate, DRILL_SENSOR_ID,
    WRIST_SENSOR_ID,
};
pub use transform::transform_wrench;
