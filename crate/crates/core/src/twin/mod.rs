//! The digital twin: labeled anatomy, distance fields, material removal and
//! the rigid set-up math that places the twin relative to the robot.

mod anatomy;
pub(crate) mod edt;
pub mod phantom;
mod pivot;
mod registration;
mod sdf;
mod volume;

pub use anatomy::{AnatomyModel, CarveOutcome};
pub use phantom::{generate_phantom, PhantomLandmarks, PhantomSpec};
pub use pivot::{pivot_calibrate, PivotCalibration, MIN_CONDITION_RATIO};
pub use registration::{register_point_sets, Registration};
pub use sdf::{build_sdf, build_sdf_with, nearest_structure, DistanceQuery, SdfField, SdfSet};
pub use volume::{
    load_volume, read_volume, save_volume, sidecar_path, validate_specs, write_volume, LabeledVolume, StructureSpec,
    SAFETY_MARGIN, VOLUME_MAGIC, VOLUME_VERSION,
};
