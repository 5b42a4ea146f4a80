//! Least-squares rigid registration of corresponding point sets.

use nalgebra::{Matrix3xX, SVD};

use crate::geometry::{Mat3, RigidTransform, Vec3};
use crate::{Error, Result};

/// Relative size of the second singular value of the centred point cloud below
/// which the points are treated as collinear.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Registration {
    /// Maps model coordinates onto measured coordinates.
    pub transform: RigidTransform,
    /// Root mean square of the residual distances (mm).
    pub rmse: f64,
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64
}

/// Finds `R, t` minimising `Σ |R·model_i + t - measured_i|²` via centroid
/// alignment and an SVD of the cross-covariance, with reflection correction.
pub fn register_point_sets(model: &[Vec3], measured: &[Vec3]) -> Result<Registration> {
    if model.len() != measured.len() {
        return Err(Error::Degenerate(format!(
            "point counts differ ({} model, {} measured)",
            model.len(),
            measured.len()
        )));
    }
    if model.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 correspondences, got {}",
            model.len()
        )));
    }
    if !model.iter().chain(measured).all(|p| p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("registration points"));
    }
    let cm = centroid(model);
    let cs = centroid(measured);
    let a = Matrix3xX::from_columns(&model.iter().map(|p| p - cm).collect::<Vec<_>>());
    let b = Matrix3xX::from_columns(&measured.iter().map(|p| p - cs).collect::<Vec<_>>());

    let spread = a.clone().svd(false, false).singular_values;
    let (s0, s1) = sorted_top_two(spread.as_slice());
    if s0 == 0.0 || s1 <= COLLINEAR_TOL * s0 {
        return Err(Error::Degenerate("model points are collinear".into()));
    }

    let h: Mat3 = &a * b.transpose();
    let svd = SVD::new(h, true, true);
    let u = svd.u.ok_or_else(|| Error::Degenerate("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("SVD failed".into()))?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let translation = cs - rotation * cm;
    let transform = RigidTransform::from_parts_unchecked(rotation, translation);

    let sq: f64 = model
        .iter()
        .zip(measured)
        .map(|(m, s)| (transform.transform_point(m) - s).norm_squared())
        .sum();
    Ok(Registration {
        transform,
        rmse: (sq / model.len() as f64).sqrt(),
    })
}

fn sorted_top_two(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    (v[0], v.get(1).copied().unwrap_or(0.0))
}
