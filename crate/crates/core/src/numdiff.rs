//! Central finite-difference Jacobians with angle-aware differencing.

use nalgebra::{DMatrix, DVector};

use crate::angle;
use crate::error::Result;

/// Perturbation used for component `x`.
#[inline]
pub fn step_size(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

/// Jacobian of `f` at `x`. Output components flagged in `angle_out` are
/// differenced modulo 2π.
pub fn central_jacobian<F>(f: F, x: &DVector<f64>, angle_out: &[bool]) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut jac: Option<DMatrix<f64>> = None;
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = step_size(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        let m = fp.len();
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(m, x.len()));
        for i in 0..m {
            let delta = if angle_out.get(i).copied().unwrap_or(false) {
                angle::diff(fp[i], fm[i])
            } else {
                fp[i] - fm[i]
            };
            jac[(i, j)] = delta / (2.0 * h);
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}
