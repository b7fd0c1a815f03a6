//! Recursive estimators over the augmented bearing state.
//!
//! All three filters share [`ekf_predict`] / [`ekf_update`]. The A-EKF
//! appends a random-walk parameter block `θ_p` of estimated home bearings to
//! the state; the PI-EKF adds `𝒫 κ` to every mean prediction and integrates
//! past innovations into `κ` through `ℳ`.

pub mod aekf;
pub mod ekf;
pub mod piekf;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::angle;
use crate::dynamics::{AugmentedState, ControlInput, Guards, LandmarkSet, POSE_DIM};
use crate::error::{HomingError, Result};
use crate::measurement::Measurement;

pub use aekf::{aekf_predict, aekf_step};
pub use ekf::{ekf_predict, ekf_update};
pub use piekf::{piekf_kappa_update, piekf_predict};

/// How the process noise enters the covariance prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessNoise {
    /// `P ← G P Gᵀ + Q` with `Q` of size `(3+q)×(3+q)`.
    State(DMatrix<f64>),
    /// `P ← G P Gᵀ + Γ_u Q Γ_uᵀ` with `Q` of size 2×2 over `(v, ω)`.
    Input(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTuning {
    pub process_noise: ProcessNoise,
    /// `q×q` measurement noise over all landmarks.
    pub r_full: DMatrix<f64>,
    /// Random-walk covariance of the A-EKF parameter block.
    pub q_d: DMatrix<f64>,
    /// PI-EKF proportional gain `𝒫`, `(3+q)×(3+q)`.
    pub pi_gain: DMatrix<f64>,
    /// PI-EKF forgetting factor `ℳ`, `(3+q)×q`; columns are picked per mask.
    pub forgetting: DMatrix<f64>,
    /// Initial covariance of the base `(3+q)` state.
    pub p0: DMatrix<f64>,
    pub guards: Guards,
}

impl FilterTuning {
    /// Defaults for `q` landmarks and `n_ip` estimated parameters:
    /// `P(0|0) = I`, `R = 0.05 I`, `Q = 0.01 I`, `Q_d = 0.0025 I`,
    /// `𝒫 = 0.05 I`, `ℳ = 1`.
    pub fn reference(q: usize, n_ip: usize) -> Self {
        let n = POSE_DIM + q;
        Self {
            process_noise: ProcessNoise::State(DMatrix::from_diagonal_element(n, n, 0.01)),
            r_full: DMatrix::from_diagonal_element(q, q, 0.05),
            q_d: DMatrix::from_diagonal_element(n_ip, n_ip, 0.0025),
            pi_gain: DMatrix::from_diagonal_element(n, n, 0.05),
            forgetting: DMatrix::from_element(n, q, 1.0),
            p0: DMatrix::identity(n, n),
            guards: Guards::default(),
        }
    }

    pub fn landmark_count(&self) -> usize {
        self.r_full.nrows()
    }

    pub fn validate(&self, q: usize, n_ip: usize) -> Result<()> {
        let n = POSE_DIM + q;
        let check = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| -> Result<()> {
            if m.shape() != (r, c) {
                return Err(HomingError::Dimension(format!(
                    "{name} is {}×{}, expected {r}×{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(HomingError::InvalidScenario(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        match &self.process_noise {
            ProcessNoise::State(m) => check("process_noise.state", m, n, n)?,
            ProcessNoise::Input(m) => check("process_noise.input", m, 2, 2)?,
        }
        check("R", &self.r_full, q, q)?;
        check("Q_d", &self.q_d, n_ip, n_ip)?;
        check("pi_gain", &self.pi_gain, n, n)?;
        check("forgetting", &self.forgetting, n, q)?;
        check("P0", &self.p0, n, n)?;
        for (name, m) in [("R", &self.r_full), ("Q_d", &self.q_d), ("P0", &self.p0)] {
            if min_eigenvalue(m) < -1e-12 {
                return Err(HomingError::InvalidScenario(format!(
                    "{name} is not positive semi-definite"
                )));
            }
        }
        let (ProcessNoise::State(m) | ProcessNoise::Input(m)) = &self.process_noise;
        if min_eigenvalue(m) < -1e-12 {
            return Err(HomingError::InvalidScenario(
                "process noise is not positive semi-definite".into(),
            ));
        }
        Ok(())
    }
}

/// Estimate, covariance and filter-specific extras.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// `[R, θ, α, β_1..β_q, θ_p..]`.
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    /// PI-EKF bias accumulator, length `3+q`.
    pub kappa: Option<DVector<f64>>,
    /// Zero-based landmark indices whose home bearing is carried in `θ_p`.
    pub estimated: Vec<usize>,
    pub q: usize,
}

impl FilterState {
    pub fn new(x0: &AugmentedState, p0: DMatrix<f64>) -> Self {
        Self {
            x_hat: x0.to_vector(),
            p: p0,
            kappa: None,
            estimated: Vec::new(),
            q: x0.landmark_count(),
        }
    }

    pub fn base_dim(&self) -> usize {
        POSE_DIM + self.q
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    pub fn estimate(&self) -> AugmentedState {
        AugmentedState::from_slice(&self.x_hat.as_slice()[..self.base_dim()])
            .expect("base state has pose components")
    }

    /// Parameter block `θ_p` (empty unless A-EKF).
    pub fn params(&self) -> &[f64] {
        &self.x_hat.as_slice()[self.base_dim()..]
    }

    /// Landmark set with estimated home bearings substituted from `θ_p`.
    pub fn landmarks_with_params(&self, landmarks: &LandmarkSet) -> LandmarkSet {
        let mut out = landmarks.clone();
        for (slot, &i) in self.estimated.iter().enumerate() {
            out.beta_star[i] = self.x_hat[self.base_dim() + slot];
        }
        out
    }

    pub(crate) fn wrap_angles(&mut self) {
        for v in self.x_hat.iter_mut().skip(1) {
            *v = angle::wrap(*v);
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// `(max |P − Pᵀ|, λ_min(P))`.
pub fn covariance_health(p: &DMatrix<f64>) -> (f64, f64) {
    let asym = (p - p.transpose()).amax();
    (asym, min_eigenvalue(p))
}

pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Ekf,
    /// Augmented EKF estimating the home bearings of the listed landmarks
    /// (zero-based).
    Aekf { estimated: Vec<usize> },
    PiEkf,
}

impl FilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Ekf => "ekf",
            Self::Aekf { .. } => "aekf",
            Self::PiEkf => "piekf",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Self::Ekf => "EKF",
            Self::Aekf { .. } => "A-EKF",
            Self::PiEkf => "PI-EKF",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parses `ekf`, `aekf` or `piekf` (with or without dashes). The A-EKF
/// parameter list is filled in by the scenario.
impl FromStr for FilterKind {
    type Err = HomingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ekf" => Ok(Self::Ekf),
            "aekf" => Ok(Self::Aekf { estimated: Vec::new() }),
            "piekf" => Ok(Self::PiEkf),
            other => Err(HomingError::InvalidScenario(format!("unknown filter {other:?}"))),
        }
    }
}

/// A running filter: kind, state, tuning and the landmark map it believes.
#[derive(Debug, Clone)]
pub struct Estimator {
    kind: FilterKind,
    state: FilterState,
    tuning: FilterTuning,
    landmarks: LandmarkSet,
}

impl Estimator {
    /// `initial_params` seeds `θ_p` for the A-EKF, one entry per estimated
    /// landmark.
    pub fn new(
        kind: FilterKind,
        x0: &AugmentedState,
        tuning: FilterTuning,
        landmarks: LandmarkSet,
        initial_params: &[f64],
    ) -> Result<Self> {
        let q = x0.landmark_count();
        let estimated = match &kind {
            FilterKind::Aekf { estimated } => estimated.clone(),
            _ => Vec::new(),
        };
        tuning.validate(q, estimated.len())?;
        let mut state = FilterState::new(x0, tuning.p0.clone());
        match &kind {
            FilterKind::Aekf { estimated } => {
                state = aekf::augment(state, estimated, initial_params, &tuning)?;
            }
            FilterKind::PiEkf => state.kappa = Some(DVector::zeros(POSE_DIM + q)),
            FilterKind::Ekf => {}
        }
        Ok(Self {
            kind,
            state,
            tuning,
            landmarks,
        })
    }

    pub fn kind(&self) -> &FilterKind {
        &self.kind
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn tuning(&self) -> &FilterTuning {
        &self.tuning
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    /// Replaces the believed home bearing of landmark `i`. For an A-EKF that
    /// estimates it, the parameter state is overwritten instead.
    pub fn set_home_bearing(&mut self, i: usize, beta_star: f64) {
        if let Some(slot) = self.state.estimated.iter().position(|&e| e == i) {
            let idx = self.state.base_dim() + slot;
            self.state.x_hat[idx] = angle::wrap(beta_star);
        } else {
            self.landmarks.beta_star[i] = angle::wrap(beta_star);
        }
    }

    /// Measurement update; returns the (possibly empty) innovation.
    pub fn update(&mut self, meas: &Measurement) -> Result<DVector<f64>> {
        let prior = self.state.x_hat.clone();
        let (next, innovation) = ekf_update(&self.state, meas, &self.tuning)?;
        self.state = next;
        if let Some(kappa) = &self.state.kappa {
            self.state.kappa = Some(piekf_kappa_update(kappa, meas, &prior, &self.tuning));
        }
        Ok(innovation)
    }

    pub fn predict(&mut self, u: ControlInput, dt: f64) -> Result<()> {
        self.state = match self.kind {
            FilterKind::Ekf => ekf_predict(&self.state, u, &self.landmarks, &self.tuning, dt)?,
            FilterKind::Aekf { .. } => aekf_predict(&self.state, u, &self.landmarks, &self.tuning, dt)?,
            FilterKind::PiEkf => piekf_predict(&self.state, u, &self.landmarks, &self.tuning, dt)?,
        };
        Ok(())
    }
}
