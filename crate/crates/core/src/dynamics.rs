//! Polar-coordinate unicycle model augmented with landmark bearings.
//!
//! State layout is `[R, θ, α, β_1, …, β_q]`: range to home (cm), polar angle of
//! the robot position, heading, then the bearing of each landmark measured from
//! the velocity vector. Every component except `R` is an angle.

use nalgebra::{DMatrix, DVector};

use crate::angle;
use crate::error::{HomingError, Result};
use crate::numdiff;

/// Index of the range component in the state vector.
pub const RANGE: usize = 0;
/// Index of the polar angle component.
pub const THETA: usize = 1;
/// Index of the heading component.
pub const ALPHA: usize = 2;
/// Number of pose components preceding the bearings.
pub const POSE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConfiguration {
    /// Range to home, cm.
    pub range: f64,
    /// Polar angle of the robot position w.r.t. the home X-axis, rad.
    pub theta: f64,
    /// Heading w.r.t. the home X-axis, rad.
    pub alpha: f64,
}

impl RobotConfiguration {
    pub fn new(range: f64, theta: f64, alpha: f64) -> Self {
        Self {
            range,
            theta: angle::wrap(theta),
            alpha: angle::wrap(alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub pose: RobotConfiguration,
    /// Landmark bearings from the velocity vector, anticlockwise positive.
    pub bearings: Vec<f64>,
}

impl AugmentedState {
    pub fn new(pose: RobotConfiguration, bearings: Vec<f64>) -> Self {
        Self {
            pose,
            bearings: bearings.into_iter().map(angle::wrap).collect(),
        }
    }

    pub fn landmark_count(&self) -> usize {
        self.bearings.len()
    }

    pub fn dim(&self) -> usize {
        POSE_DIM + self.bearings.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[RANGE] = self.pose.range;
        v[THETA] = self.pose.theta;
        v[ALPHA] = self.pose.alpha;
        for (i, b) in self.bearings.iter().enumerate() {
            v[POSE_DIM + i] = *b;
        }
        v
    }

    /// Builds a state from `[R, θ, α, β_1..]`. Angles are wrapped.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() < POSE_DIM {
            return Err(HomingError::Dimension(format!(
                "state needs at least {POSE_DIM} components, got {}",
                x.len()
            )));
        }
        Ok(Self::new(
            RobotConfiguration::new(x[RANGE], x[THETA], x[ALPHA]),
            x[POSE_DIM..].to_vec(),
        ))
    }
}

/// Home-frame landmark description: bearing from home and distance from home.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub beta_star: Vec<f64>,
    pub d_star: Vec<f64>,
}

impl LandmarkSet {
    pub fn new(beta_star: Vec<f64>, d_star: Vec<f64>) -> Result<Self> {
        if beta_star.len() != d_star.len() {
            return Err(HomingError::Dimension(format!(
                "{} home bearings but {} home distances",
                beta_star.len(),
                d_star.len()
            )));
        }
        if let Some(i) = d_star.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(HomingError::InvalidScenario(format!(
                "home distance of landmark {} must be finite and positive",
                i + 1
            )));
        }
        Ok(Self {
            beta_star: beta_star.into_iter().map(angle::wrap).collect(),
            d_star,
        })
    }

    /// Landmarks from Cartesian positions (cm) with home at the origin.
    pub fn from_positions(points: &[[f64; 2]]) -> Result<Self> {
        let beta = points.iter().map(|p| p[1].atan2(p[0])).collect();
        let dist = points.iter().map(|p| p[0].hypot(p[1])).collect();
        Self::new(beta, dist)
    }

    pub fn len(&self) -> usize {
        self.beta_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_star.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Linear velocity, cm/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
}

impl ControlInput {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_row_slice(&[self.v, self.omega])
    }
}

/// Singularity thresholds for the polar model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guards {
    /// Minimum range, cm.
    pub eps_range: f64,
    /// Minimum magnitude of any geometric denominator.
    pub eps_den: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            eps_range: 1e-6,
            eps_den: 1e-9,
        }
    }
}

/// Home distance of a landmark from the current pose and bearing (sine rule).
pub fn landmark_distance(pose: &RobotConfiguration, beta_i: f64, beta_star_i: f64) -> Result<f64> {
    landmark_distance_guarded(pose, beta_i, beta_star_i, Guards::default().eps_den)
}

pub fn landmark_distance_guarded(
    pose: &RobotConfiguration,
    beta_i: f64,
    beta_star_i: f64,
    eps_den: f64,
) -> Result<f64> {
    let phi = beta_i + pose.alpha;
    let den = (beta_star_i - phi).sin();
    if den.abs() <= eps_den {
        return Err(HomingError::DegenerateGeometry {
            landmark: 0,
            denominator: den,
        });
    }
    Ok(pose.range * (pose.theta - phi).sin() / den)
}

/// Bearing of a landmark seen from `pose`, measured from the heading.
pub fn bearing_to_landmark(pose: &RobotConfiguration, beta_star: f64, d_star: f64) -> f64 {
    let dx = d_star * beta_star.cos() - pose.range * pose.theta.cos();
    let dy = d_star * beta_star.sin() - pose.range * pose.theta.sin();
    angle::wrap(dy.atan2(dx) - pose.alpha)
}

/// Bearings of every landmark seen from `pose`.
pub fn bearings_from_pose(pose: &RobotConfiguration, landmarks: &LandmarkSet) -> Vec<f64> {
    landmarks
        .beta_star
        .iter()
        .zip(&landmarks.d_star)
        .map(|(b, d)| bearing_to_landmark(pose, *b, *d))
        .collect()
}

/// Continuous-time rates `g(X, U)` on a raw state vector.
pub(crate) fn rates_into(
    x: &[f64],
    u: ControlInput,
    landmarks: &LandmarkSet,
    guards: Guards,
    out: &mut [f64],
) -> Result<()> {
    let q = x.len() - POSE_DIM;
    if landmarks.len() != q {
        return Err(HomingError::Dimension(format!(
            "state carries {q} bearings but {} landmarks are configured",
            landmarks.len()
        )));
    }
    let (r, theta, alpha) = (x[RANGE], x[THETA], x[ALPHA]);
    if r <= guards.eps_range {
        return Err(HomingError::NearHomeSingularity { range: r });
    }
    let heading_offset = alpha - theta;
    out[RANGE] = u.v * heading_offset.cos();
    out[THETA] = u.v * heading_offset.sin() / r;
    out[ALPHA] = u.omega;
    for i in 0..q {
        let beta = x[POSE_DIM + i];
        let phi = beta + alpha;
        let d = r * (theta - phi).cos() - landmarks.d_star[i] * (landmarks.beta_star[i] - phi).cos();
        if d.abs() <= guards.eps_den {
            return Err(HomingError::DegenerateGeometry {
                landmark: i + 1,
                denominator: d,
            });
        }
        out[POSE_DIM + i] = -u.v * beta.sin() / d - u.omega;
    }
    Ok(())
}

/// Time derivative of the augmented state, per second.
pub fn state_derivative(
    x: &AugmentedState,
    u: ControlInput,
    landmarks: &LandmarkSet,
) -> Result<DVector<f64>> {
    let xv = x.to_vector();
    let mut out = DVector::zeros(xv.len());
    rates_into(xv.as_slice(), u, landmarks, Guards::default(), out.as_mut_slice())?;
    Ok(out)
}

/// One fixed RK4 step on a raw state vector, angles wrapped afterwards.
pub fn step_vector(
    x: &DVector<f64>,
    u: ControlInput,
    landmarks: &LandmarkSet,
    dt: f64,
    guards: Guards,
) -> Result<DVector<f64>> {
    let n = x.len();
    if dt == 0.0 {
        return Ok(x.clone());
    }
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    rates_into(x.as_slice(), u, landmarks, guards, k1.as_mut_slice())?;
    let x2 = x + &k1 * (0.5 * dt);
    rates_into(x2.as_slice(), u, landmarks, guards, k2.as_mut_slice())?;
    let x3 = x + &k2 * (0.5 * dt);
    rates_into(x3.as_slice(), u, landmarks, guards, k3.as_mut_slice())?;
    let x4 = x + &k3 * dt;
    rates_into(x4.as_slice(), u, landmarks, guards, k4.as_mut_slice())?;
    let mut next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    wrap_state(next.as_mut_slice());
    Ok(next)
}

/// Wraps every angle component of `[R, θ, α, β..]` in place.
pub fn wrap_state(x: &mut [f64]) {
    for v in x.iter_mut().skip(THETA) {
        *v = angle::wrap(*v);
    }
}

/// Advances the augmented state by `dt` seconds.
pub fn integrate_step(
    x: &AugmentedState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    dt: f64,
) -> Result<AugmentedState> {
    if dt < 0.0 {
        return Err(HomingError::InvalidScenario(format!("negative step {dt}")));
    }
    let next = step_vector(&x.to_vector(), u, landmarks, dt, Guards::default())?;
    AugmentedState::from_slice(next.as_slice())
}

/// `true` for every angle component of a state of dimension `n`.
pub fn angle_mask(n: usize) -> Vec<bool> {
    (0..n).map(|i| i != RANGE).collect()
}

/// Jacobians `(G, Γ_u)` of the discrete RK4 map w.r.t. state and input,
/// by central differences.
pub fn transition_jacobians(
    x: &AugmentedState,
    u: ControlInput,
    landmarks: &LandmarkSet,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    transition_jacobians_vector(&x.to_vector(), u, landmarks, dt, Guards::default())
}

pub fn transition_jacobians_vector(
    x: &DVector<f64>,
    u: ControlInput,
    landmarks: &LandmarkSet,
    dt: f64,
    guards: Guards,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mask = angle_mask(x.len());
    let g = numdiff::central_jacobian(
        |xp| step_vector(xp, u, landmarks, dt, guards),
        x,
        &mask,
    )?;
    let gamma = numdiff::central_jacobian(
        |up| step_vector(x, ControlInput::new(up[0], up[1]), landmarks, dt, guards),
        &u.to_vector(),
        &mask,
    )?;
    Ok((g, gamma))
}
