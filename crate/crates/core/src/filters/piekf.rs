//! Proportional-integral EKF.

use nalgebra::DVector;

use super::ekf::{innovation, propagate};
use super::{FilterState, FilterTuning};
use crate::dynamics::{ControlInput, LandmarkSet};
use crate::error::Result;
use crate::measurement::Measurement;

/// EKF prediction plus the bias `𝒫 κ` on the mean. The covariance is the
/// EKF one.
pub fn piekf_predict(
    fs: &FilterState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    tuning: &FilterTuning,
    dt: f64,
) -> Result<FilterState> {
    let mut next = propagate(fs, u, landmarks, tuning, dt)?;
    if let Some(kappa) = &fs.kappa {
        let nb = fs.base_dim();
        let bias = &tuning.pi_gain * kappa;
        let mut base = next.x_hat.rows_mut(0, nb);
        base += bias;
        next.wrap_angles();
    }
    Ok(next)
}

/// `κ ← κ + ℳ_p e`, with `e` the wrapped innovation of `meas_prev` against the
/// prediction it was compared with and `ℳ_p` the columns of `ℳ` in mask order.
pub fn piekf_kappa_update(
    kappa: &DVector<f64>,
    meas_prev: &Measurement,
    x_pred_prev: &DVector<f64>,
    tuning: &FilterTuning,
) -> DVector<f64> {
    if meas_prev.mask.is_empty() {
        return kappa.clone();
    }
    let e = innovation(x_pred_prev, meas_prev);
    let m_p = tuning.forgetting.select_columns(meas_prev.mask.indices());
    kappa + m_p * e
}
