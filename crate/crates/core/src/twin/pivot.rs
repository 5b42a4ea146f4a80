//! Pivot calibration: recovers the tool-tip offset from tracked poses taken
//! while the tip rests in a fixed divot.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{RigidTransform, Vec3};
use crate::{Error, Result};

/// Ratio `s_min / s_max` of the stacked system below which the rotations are
/// considered too similar to observe the tip offset.
pub const MIN_CONDITION_RATIO: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PivotCalibration {
    /// Tip position in the tool frame (mm).
    pub tip_offset: Vec3,
    /// Pivot position in the tracker/world frame (mm).
    pub pivot: Vec3,
    pub rmse: f64,
}

/// Solves `R_i·t_tip - p_pivot = -p_i` in the least-squares sense.
pub fn pivot_calibrate(poses: &[RigidTransform]) -> Result<PivotCalibration> {
    if poses.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 poses, got {}", poses.len())));
    }
    let n = poses.len();
    let mut a = DMatrix::<f64>::zeros(3 * n, 6);
    let mut b = DVector::<f64>::zeros(3 * n);
    for (i, pose) in poses.iter().enumerate() {
        let r = pose.rotation();
        let p = pose.translation();
        for row in 0..3 {
            for col in 0..3 {
                a[(3 * i + row, col)] = r[(row, col)];
            }
            a[(3 * i + row, 3 + row)] = -1.0;
            b[3 * i + row] = -p[row];
        }
    }
    let svd = a.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    let ratio = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if ratio < MIN_CONDITION_RATIO {
        return Err(Error::IllConditioned(ratio));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Degenerate(format!("pivot solve failed: {e}")))?;
    let tip_offset = Vec3::new(x[0], x[1], x[2]);
    let pivot = Vec3::new(x[3], x[4], x[5]);
    let sq: f64 = poses
        .iter()
        .map(|pose| (pose.transform_point(&tip_offset) - pivot).norm_squared())
        .sum();
    Ok(PivotCalibration {
        tip_offset,
        pivot,
        rmse: (sq / n as f64).sqrt(),
    })
}
