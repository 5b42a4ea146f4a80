//! The admittance solve: joint rates that best realise `σ·G·F_H` at the tip.

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use super::wrench::Wrench;
use crate::{Error, Result};

/// Default damping μ for the damped least-squares solve.
pub const DEFAULT_DAMPING: f64 = 1e-3;

/// Relative pivot size below which an undamped normal-equation factorisation is
/// treated as singular.
const UNDAMPED_PIVOT_TOL: f64 = 1e-7;

/// Diagonal admittance gains: translational mm·s⁻¹·N⁻¹ and rotational
/// rad·s⁻¹·(N·mm)⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct GainMatrix {
    diag: [f64; 6],
}

impl GainMatrix {
    pub fn new(diag: [f64; 6]) -> Result<Self> {
        if diag.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "admittance gains must be > 0, got {diag:?}"
            )));
        }
        Ok(GainMatrix { diag })
    }

    pub fn diagonal(&self) -> [f64; 6] {
        self.diag
    }

    pub fn apply(&self, w: &Wrench) -> Vector6<f64> {
        let v = w.to_vector();
        Vector6::from_fn(|i, _| self.diag[i] * v[i])
    }
}

impl TryFrom<[f64; 6]> for GainMatrix {
    type Error = Error;
    fn try_from(d: [f64; 6]) -> Result<Self> {
        GainMatrix::new(d)
    }
}

impl From<GainMatrix> for [f64; 6] {
    fn from(g: GainMatrix) -> Self {
        g.diag
    }
}

/// `Δq = Jᵀ(JJᵀ + μ²I)⁻¹·σG·F_H`, the minimiser of
/// `|σG·F_H - JΔq|² + μ²|Δq|²`.
///
/// `F_H` must be expressed in the same frame as the Jacobian. With `μ = 0`
/// and a rank-deficient Jacobian the minimum-norm least-squares solution is
/// returned.
pub fn solve_admittance(
    jacobian: &DMatrix<f64>,
    gains: &GainMatrix,
    sigma: f64,
    hand: &Wrench,
    damping: f64,
) -> Result<DVector<f64>> {
    if jacobian.nrows() != 6 {
        return Err(Error::InvalidArgument(format!(
            "Jacobian must have 6 rows, has {}",
            jacobian.nrows()
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if !(damping >= 0.0) || !damping.is_finite() {
        return Err(Error::InvalidArgument(format!("damping must be >= 0, got {damping}")));
    }
    hand.ensure_finite("hand wrench")?;
    if jacobian.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Jacobian"));
    }
    let target = DVector::from_column_slice((gains.apply(hand) * sigma).as_slice());
    let m = jacobian.ncols();
    let mu2 = damping * damping;

    // Use whichever normal-equation form is smaller; they are algebraically
    // identical for μ > 0.
    let solution = if m >= 6 {
        let gram = jacobian * jacobian.transpose() + DMatrix::identity(6, 6) * mu2;
        solve_spd(gram, &target, damping == 0.0).map(|y| jacobian.transpose() * y)
    } else {
        let gram = jacobian.transpose() * jacobian + DMatrix::identity(m, m) * mu2;
        solve_spd(gram, &(jacobian.transpose() * &target), damping == 0.0)
    };
    Ok(match solution {
        Some(dq) => dq,
        None => minimum_norm(jacobian, &target),
    })
}

fn solve_spd(gram: DMatrix<f64>, rhs: &DVector<f64>, undamped: bool) -> Option<DVector<f64>> {
    let chol = gram.cholesky()?;
    if undamped {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if !(lo > UNDAMPED_PIVOT_TOL * hi) {
            return None;
        }
    }
    Some(chol.solve(rhs))
}

fn minimum_norm(jacobian: &DMatrix<f64>, target: &DVector<f64>) -> DVector<f64> {
    let svd = jacobian.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(target, tol)
        .unwrap_or_else(|_| DVector::zeros(jacobian.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::robot::Frame;

    fn unit_gains() -> GainMatrix {
        GainMatrix::new([1.0; 6]).unwrap()
    }

    #[test]
    fn zero_force_gives_zero_motion() {
        let j = DMatrix::from_fn(6, 6, |r, c| {
            ((r * 7 + c * 3) % 5) as f64 + if r == c { 4.0 } else { 0.0 }
        });
        let dq = solve_admittance(&j, &unit_gains(), 1.0, &Wrench::zero(Frame::World), DEFAULT_DAMPING).unwrap();
        assert!(dq.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_jacobian_passes_target_through() {
        let j = DMatrix::identity(6, 6);
        let w = Wrench::new(Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.1, 0.0, -0.3), Frame::World);
        let dq = solve_admittance(&j, &unit_gains(), 1.0, &w, 0.0).unwrap();
        for (a, b) in dq.iter().zip(w.to_array()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let j = DMatrix::identity(6, 6);
        let nan = Wrench::force_only(Vec3::new(f64::NAN, 0.0, 0.0), Frame::World);
        assert!(matches!(
            solve_admittance(&j, &unit_gains(), 1.0, &nan, 0.0),
            Err(Error::NonFinite(_))
        ));
        let w = Wrench::zero(Frame::World);
        assert!(solve_admittance(&j, &unit_gains(), 0.0, &w, 0.0).is_err());
        assert!(GainMatrix::new([1.0, 1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn undamped_rank_deficient_falls_back_to_minimum_norm() {
        let mut j = DMatrix::zeros(6, 6);
        j[(0, 0)] = 1.0;
        j[(0, 1)] = 1.0;
        let w = Wrench::force_only(Vec3::new(2.0, 0.0, 0.0), Frame::World);
        let dq = solve_admittance(&j, &unit_gains(), 1.0, &w, 0.0).unwrap();
        assert!((dq[0] - 1.0).abs() < 1e-12 && (dq[1] - 1.0).abs() < 1e-12);
    }
}
