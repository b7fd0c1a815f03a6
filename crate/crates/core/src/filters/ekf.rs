//! Multi-rate EKF prediction and update.

use nalgebra::{DMatrix, DVector};

use super::{symmetrize, FilterState, FilterTuning, ProcessNoise};
use crate::angle;
use crate::dynamics::{self, angle_mask, ControlInput, LandmarkSet, POSE_DIM};
use crate::error::{HomingError, Result};
use crate::measurement::{full_h, select_rows, Measurement};
use crate::numdiff;

/// Largest accepted condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Mean and covariance prediction shared by every filter. A non-empty
/// parameter block is carried through unchanged (random walk) and its home
/// bearings replace the configured ones in the dynamics.
pub(crate) fn propagate(
    fs: &FilterState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    tuning: &FilterTuning,
    dt: f64,
) -> Result<FilterState> {
    let nb = fs.base_dim();
    let n = fs.dim();
    let guards = tuning.guards;
    let (mean, g, gamma) = if n == nb {
        let mean = dynamics::step_vector(&fs.x_hat, u, landmarks, dt, guards)?;
        let (g, gamma) = dynamics::transition_jacobians_vector(&fs.x_hat, u, landmarks, dt, guards)?;
        (mean, g, gamma)
    } else {
        let estimated = &fs.estimated;
        let map = |x: &DVector<f64>, u: ControlInput| -> Result<DVector<f64>> {
            let mut lm = landmarks.clone();
            for (slot, &i) in estimated.iter().enumerate() {
                lm.beta_star[i] = x[nb + slot];
            }
            let base = dynamics::step_vector(&x.rows(0, nb).into_owned(), u, &lm, dt, guards)?;
            let mut out = x.clone();
            out.rows_mut(0, nb).copy_from(&base);
            Ok(out)
        };
        let mask = angle_mask(n);
        let mean = map(&fs.x_hat, u)?;
        let g = numdiff::central_jacobian(|xp| map(xp, u), &fs.x_hat, &mask)?;
        let gamma = numdiff::central_jacobian(
            |up| map(&fs.x_hat, ControlInput::new(up[0], up[1])),
            &u.to_vector(),
            &mask,
        )?;
        (mean, g, gamma)
    };

    let mut p = &g * &fs.p * g.transpose();
    match &tuning.process_noise {
        ProcessNoise::State(q) => {
            let mut block = p.view_mut((0, 0), (nb, nb));
            block += q;
        }
        ProcessNoise::Input(q) => {
            let gb = gamma.rows(0, nb);
            let add = gb * q * gb.transpose();
            let mut block = p.view_mut((0, 0), (nb, nb));
            block += add;
        }
    }
    if n > nb {
        let mut block = p.view_mut((nb, nb), (n - nb, n - nb));
        block += &tuning.q_d;
    }
    symmetrize(&mut p);

    let mut next = fs.clone();
    next.x_hat = mean;
    next.p = p;
    next.wrap_angles();
    Ok(next)
}

/// `x̂(k|k−1) = F(x̂(k−1|k−1), U)`, `P ← G P Gᵀ + Q`.
pub fn ekf_predict(
    fs: &FilterState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    tuning: &FilterTuning,
    dt: f64,
) -> Result<FilterState> {
    propagate(fs, u, landmarks, tuning, dt)
}

/// Measurement matrix over the full filter state for the rows in `meas`.
pub(crate) fn measurement_rows(fs: &FilterState, meas: &Measurement, tuning: &FilterTuning) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut h = DMatrix::zeros(fs.q, fs.dim());
    h.columns_mut(0, POSE_DIM + fs.q).copy_from(&full_h(fs.q));
    select_rows(&h, &meas.mask, &tuning.r_full)
}

/// Wrapped innovation `Y_p − H_p x̂`.
pub fn innovation(x_hat: &DVector<f64>, meas: &Measurement) -> DVector<f64> {
    DVector::from_iterator(
        meas.values.len(),
        meas.values
            .iter()
            .zip(meas.mask.indices())
            .map(|(y, &i)| angle::diff(*y, x_hat[POSE_DIM + i])),
    )
}

/// Kalman update with the rows of `H` that were measured. An empty mask
/// returns the state untouched with an empty innovation.
pub fn ekf_update(
    fs: &FilterState,
    meas: &Measurement,
    tuning: &FilterTuning,
) -> Result<(FilterState, DVector<f64>)> {
    if meas.mask.is_empty() {
        return Ok((fs.clone(), DVector::zeros(0)));
    }
    if meas.mask.indices().iter().any(|&i| i >= fs.q) {
        return Err(HomingError::Dimension("mask refers to unknown landmark".into()));
    }
    let (h_p, r_p) = measurement_rows(fs, meas, tuning);
    let e = innovation(&fs.x_hat, meas);

    let pht = &fs.p * h_p.transpose();
    let mut s = &h_p * &pht + r_p;
    symmetrize(&mut s);
    let eig = s.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < MAX_INNOVATION_CONDITION) {
        return Err(HomingError::IllConditionedInnovation { condition });
    }
    let s_inv = s
        .cholesky()
        .ok_or(HomingError::IllConditionedInnovation { condition })?
        .inverse();
    let gain = pht * s_inv;

    let mut next = fs.clone();
    next.x_hat += &gain * &e;
    next.wrap_angles();
    let n = fs.dim();
    next.p = (DMatrix::identity(n, n) - &gain * &h_p) * &fs.p;
    symmetrize(&mut next.p);
    Ok((next, e))
}
