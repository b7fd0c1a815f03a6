//! Augmented-state EKF: selected home bearings appended as random-walk
//! parameters.

use nalgebra::{DMatrix, DVector};

use super::ekf::{ekf_update, propagate};
use super::{FilterState, FilterTuning};
use crate::angle;
use crate::dynamics::{ControlInput, LandmarkSet};
use crate::error::{HomingError, Result};
use crate::measurement::Measurement;

/// Appends `θ_p` to the state. The covariance grows block-diagonally with
/// `Q_d` as the initial parameter covariance.
pub fn augment(
    fs: FilterState,
    estimated: &[usize],
    initial_params: &[f64],
    tuning: &FilterTuning,
) -> Result<FilterState> {
    if estimated.len() != initial_params.len() {
        return Err(HomingError::Dimension(format!(
            "{} estimated parameters but {} initial values",
            estimated.len(),
            initial_params.len()
        )));
    }
    if let Some(&i) = estimated.iter().find(|&&i| i >= fs.q) {
        return Err(HomingError::InvalidScenario(format!(
            "estimated landmark {} does not exist",
            i + 1
        )));
    }
    let nb = fs.base_dim();
    let n = nb + estimated.len();
    let mut x = DVector::zeros(n);
    x.rows_mut(0, nb).copy_from(&fs.x_hat);
    for (slot, v) in initial_params.iter().enumerate() {
        x[nb + slot] = angle::wrap(*v);
    }
    let mut p = DMatrix::zeros(n, n);
    p.view_mut((0, 0), (nb, nb)).copy_from(&fs.p);
    p.view_mut((nb, nb), (n - nb, n - nb)).copy_from(&tuning.q_d);
    Ok(FilterState {
        x_hat: x,
        p,
        kappa: fs.kappa,
        estimated: estimated.to_vec(),
        q: fs.q,
    })
}

/// Prediction of the augmented state; `θ_p` is held constant and its
/// covariance grows by `Q_d`.
pub fn aekf_predict(
    fs: &FilterState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    tuning: &FilterTuning,
    dt: f64,
) -> Result<FilterState> {
    propagate(fs, u, landmarks, tuning, dt)
}

/// Prediction followed by the measurement update. `θ_p` is not measured
/// directly; it moves only through its cross-covariance with the bearings.
pub fn aekf_step(
    fs: &FilterState,
    u: ControlInput,
    meas: &Measurement,
    landmarks: &LandmarkSet,
    tuning: &FilterTuning,
    dt: f64,
) -> Result<(FilterState, DVector<f64>)> {
    let predicted = aekf_predict(fs, u, landmarks, tuning, dt)?;
    ekf_update(&predicted, meas, tuning)
}
