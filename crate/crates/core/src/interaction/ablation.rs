//! Material removal while the drill is powered.
//!
//! Each carvable structure in contact recedes continuously at
//! `removal_rate · (F_n − cut_threshold)`. The recession is tracked below
//! voxel resolution and subtracted from the penetration; once it reaches one
//! voxel, a burr-shaped layer is removed from the volume and the distance
//! fields are rebuilt, so the force stays continuous across the carve.

use crate::twin::{AnatomyModel, CarveOutcome};
use crate::Result;

use super::contact::{ContactModel, ContactResult, MaterialParams};
use crate::geometry::Vec3;

/// One carve performed during an ablation step.
#[derive(Clone, Debug, PartialEq)]
pub struct CarveEvent {
    /// Field position of the structure being drilled.
    pub structure: usize,
    pub center: Vec3,
    pub outcome: CarveOutcome,
}

/// Advances recession by `dt` and carves where it crossed a voxel.
pub fn ablate(
    anatomy: &mut AnatomyModel,
    model: &mut ContactModel,
    contact: &ContactResult,
    tip: &Vec3,
    materials: &MaterialParams,
    power: bool,
    dt: f64,
) -> Result<Vec<CarveEvent>> {
    let mut events = Vec::new();
    if !power || materials.removal_rate == 0.0 {
        return Ok(events);
    }
    let h = anatomy.volume().min_spacing();
    for c in &contact.contacts {
        if anatomy.spec_at(c.structure).critical {
            continue;
        }
        let excess = c.force - materials.cut_threshold;
        if excess <= 0.0 {
            continue;
        }
        let r = model.recession_mut(c.structure);
        *r += materials.removal_rate * excess * dt;
        if *r < h {
            continue;
        }
        let raw_depth = c.penetration + *r;
        let center = tip + c.normal * (materials.burr_radius + raw_depth - h);
        let outcome = anatomy.carve(&center, materials.burr_radius)?;
        if outcome.removed > 0 {
            *model.recession_mut(c.structure) -= h;
        } else {
            // Nothing left to remove here; keep the force honest.
            *model.recession_mut(c.structure) = h;
        }
        events.push(CarveEvent {
            structure: c.structure,
            center,
            outcome,
        });
    }
    Ok(events)
}
