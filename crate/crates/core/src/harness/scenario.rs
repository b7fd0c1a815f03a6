//! Scenario description: the on-disk TOML schema and its resolved form.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::controller::ControllerConfig;
use crate::dynamics::{self, LandmarkSet, RobotConfiguration, POSE_DIM};
use crate::error::{HomingError, Result};
use crate::filters::{FilterKind, FilterTuning, ProcessNoise};
use crate::measurement::VisibilityPolicy;

/// A matrix given as a scalar, a diagonal, or in full (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    /// Scalar means `s·I`, a list is the diagonal.
    pub fn to_square(&self, key: &str, n: usize) -> Result<DMatrix<f64>> {
        match self {
            Self::Scalar(s) => Ok(DMatrix::from_diagonal_element(n, n, *s)),
            Self::Diagonal(d) if d.len() == n => Ok(DMatrix::from_diagonal(&d.clone().into())),
            Self::Diagonal(d) => Err(HomingError::InvalidScenario(format!(
                "{key}: diagonal has {} entries, expected {n}",
                d.len()
            ))),
            Self::Full(_) => self.to_full(key, n, n),
        }
    }

    /// Scalar means every entry equals `s`.
    pub fn to_filled(&self, key: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        match self {
            Self::Scalar(s) => Ok(DMatrix::from_element(rows, cols, *s)),
            Self::Diagonal(_) => Err(HomingError::InvalidScenario(format!(
                "{key}: expected a scalar or a {rows}×{cols} matrix"
            ))),
            Self::Full(_) => self.to_full(key, rows, cols),
        }
    }

    fn to_full(&self, key: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let Self::Full(r) = self else { unreachable!() };
        if r.len() != rows || r.iter().any(|row| row.len() != cols) {
            return Err(HomingError::InvalidScenario(format!(
                "{key}: expected a {rows}×{cols} matrix"
            )));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| r[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    ClosedLoop,
    OpenLoop { v_cm_s: f64, omega_rad_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub r_cm: f64,
    pub theta_rad: f64,
    pub alpha_rad: f64,
}

/// Offset of the initial estimate from the true initial pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOffset {
    #[serde(default)]
    pub dr_cm: f64,
    #[serde(default)]
    pub dtheta_rad: f64,
    #[serde(default)]
    pub dalpha_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandmarkLayout {
    /// `count` landmarks evenly spaced on a circle around home, the first at
    /// `phase_rad`.
    Ring { count: usize, radius_cm: f64, phase_rad: f64 },
    /// Cartesian positions, home at the origin.
    Positions { points_cm: Vec<[f64; 2]> },
    /// Home bearings and distances.
    Polar { beta_star_rad: Vec<f64>, d_star_cm: Vec<f64> },
}

impl LandmarkLayout {
    pub fn count(&self) -> usize {
        match self {
            Self::Ring { count, .. } => *count,
            Self::Positions { points_cm } => points_cm.len(),
            Self::Polar { beta_star_rad, .. } => beta_star_rad.len(),
        }
    }

    pub fn to_landmarks(&self) -> Result<LandmarkSet> {
        match self {
            Self::Ring {
                count,
                radius_cm,
                phase_rad,
            } => {
                let beta = (0..*count)
                    .map(|i| angle::wrap(phase_rad + 2.0 * PI * i as f64 / *count as f64))
                    .collect();
                LandmarkSet::new(beta, vec![*radius_cm; *count])
            }
            Self::Positions { points_cm } => LandmarkSet::from_positions(points_cm),
            Self::Polar {
                beta_star_rad,
                d_star_cm,
            } => LandmarkSet::new(beta_star_rad.clone(), d_star_cm.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Multiplicative,
    Additive,
}

/// Perturbation of one home bearing as seen by the filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fault {
    /// One-based landmark index.
    pub landmark: usize,
    pub kind: FaultKind,
    pub value: f64,
    #[serde(default)]
    pub onset_step: u64,
}

impl Fault {
    pub fn apply(&self, beta_star: f64) -> f64 {
        angle::wrap(match self.kind {
            FaultKind::Multiplicative => beta_star * self.value,
            FaultKind::Additive => beta_star + self.value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessNoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default = "one")]
    pub p0: MatrixSpec,
    #[serde(default = "r_default")]
    pub r_rad2: MatrixSpec,
    #[serde(default = "pn_default")]
    pub process_noise: ProcessNoiseConfig,
    #[serde(default = "qd_default")]
    pub qd: MatrixSpec,
    #[serde(default = "pi_default")]
    pub pi_gain: MatrixSpec,
    #[serde(default = "one")]
    pub forgetting: MatrixSpec,
}

fn one() -> MatrixSpec {
    MatrixSpec::Scalar(1.0)
}
fn r_default() -> MatrixSpec {
    MatrixSpec::Scalar(0.05)
}
fn pn_default() -> ProcessNoiseConfig {
    ProcessNoiseConfig {
        state: Some(MatrixSpec::Scalar(0.01)),
        input: None,
    }
}
fn qd_default() -> MatrixSpec {
    MatrixSpec::Scalar(0.0025)
}
fn pi_default() -> MatrixSpec {
    MatrixSpec::Scalar(0.05)
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            p0: one(),
            r_rad2: r_default(),
            process_noise: pn_default(),
            qd: qd_default(),
            pi_gain: pi_default(),
            forgetting: one(),
        }
    }
}

impl TuningConfig {
    pub fn resolve(&self, q: usize, n_ip: usize) -> Result<FilterTuning> {
        let n = POSE_DIM + q;
        let process_noise = match (&self.process_noise.state, &self.process_noise.input) {
            (Some(s), None) => ProcessNoise::State(s.to_square("tuning.process_noise.state", n)?),
            (None, Some(i)) => ProcessNoise::Input(i.to_square("tuning.process_noise.input", 2)?),
            _ => {
                return Err(HomingError::InvalidScenario(
                    "tuning.process_noise: set exactly one of `state` or `input`".into(),
                ))
            }
        };
        let tuning = FilterTuning {
            process_noise,
            r_full: self.r_rad2.to_square("tuning.r_rad2", q)?,
            q_d: self.qd.to_square("tuning.qd", n_ip)?,
            pi_gain: self.pi_gain.to_square("tuning.pi_gain", n)?,
            forgetting: self.forgetting.to_filled("tuning.forgetting", n, q)?,
            p0: self.p0.to_square("tuning.p0", n)?,
            guards: Default::default(),
        };
        tuning
            .validate(q, n_ip)
            .map_err(|e| HomingError::InvalidScenario(format!("tuning: {e}")))?;
        Ok(tuning)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AekfConfig {
    /// One-based indices of the landmarks whose home bearing is estimated.
    #[serde(default)]
    pub estimate: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub master: u64,
    #[serde(default = "one_replicate")]
    pub replicates: usize,
}

fn one_replicate() -> usize {
    1
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            master: 0,
            replicates: 1,
        }
    }
}

/// Pose from which the filters compute the landmark home distances at start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomeDistanceSource {
    /// The (possibly perturbed) initial estimate.
    #[default]
    InitialEstimate,
    /// The true initial pose, giving exact home distances.
    TruePose,
}

/// The scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "dt_default")]
    pub dt_s: f64,
    #[serde(default = "max_steps_default")]
    pub max_steps: u64,
    /// Standard deviation of the synthesized bearing noise. Defaults to
    /// `sqrt(R_ii)` of the first filter's tuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_noise_std_rad: Option<f64>,
    #[serde(default)]
    pub home_distance_source: HomeDistanceSource,
    #[serde(default = "filters_default")]
    pub filters: Vec<String>,
    #[serde(default = "mode_default")]
    pub mode: ModeConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default = "pose_default")]
    pub initial_pose: PoseConfig,
    #[serde(default)]
    pub initial_estimate: EstimateOffset,
    pub landmarks: LandmarkLayout,
    #[serde(default)]
    pub faults: Vec<Fault>,
    #[serde(default = "visibility_default")]
    pub visibility: VisibilityPolicy,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub aekf: AekfConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    /// Run metadata written by the CLI; ignored when running.
    #[serde(default, skip_serializing)]
    pub manifest: Option<toml::Table>,
}

fn dt_default() -> f64 {
    0.05
}
fn max_steps_default() -> u64 {
    4000
}
fn filters_default() -> Vec<String> {
    vec!["ekf".into(), "aekf".into(), "piekf".into()]
}
fn mode_default() -> ModeConfig {
    ModeConfig::ClosedLoop
}
fn pose_default() -> PoseConfig {
    PoseConfig {
        r_cm: 75.0,
        theta_rad: -0.872,
        alpha_rad: 0.349,
    }
}
fn visibility_default() -> VisibilityPolicy {
    VisibilityPolicy::AllVisible
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    ClosedLoop,
    OpenLoop(dynamics::ControlInput),
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dt: f64,
    pub max_steps: u64,
    pub q: usize,
    /// True geometry.
    pub landmarks: LandmarkSet,
    pub initial_pose: RobotConfiguration,
    pub initial_offset: EstimateOffset,
    pub faults: Vec<Fault>,
    pub visibility: VisibilityPolicy,
    /// Per-landmark standard deviation of the synthesized bearing noise.
    pub noise_std: Vec<f64>,
    pub home_distance_source: HomeDistanceSource,
    pub filters: Vec<FilterKind>,
    /// Tuning per entry of `filters`.
    pub tunings: Vec<FilterTuning>,
    pub mode: Mode,
    pub controller: ControllerConfig,
    pub master_seed: u64,
    pub replicates: usize,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HomingError::InvalidScenario(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Resolves and validates everything a run needs, including `q ≥ 2`.
    pub fn resolve(&self) -> Result<Scenario> {
        let bad = |key: &str, msg: String| HomingError::InvalidScenario(format!("{key}: {msg}"));
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(bad("dt_s", format!("must be positive, got {}", self.dt_s)));
        }
        if self.max_steps == 0 {
            return Err(bad("max_steps", "must be at least 1".into()));
        }
        let q = self.landmarks.count();
        if q < 2 {
            return Err(bad(
                "landmarks",
                format!(
                    "q = {q}, but local observability of the {} states needs q ≥ 2 landmarks",
                    q + POSE_DIM
                ),
            ));
        }
        let landmarks = self.landmarks.to_landmarks().map_err(|e| bad("landmarks", e.to_string()))?;
        let p = self.initial_pose;
        if !(p.r_cm > 0.0 && p.r_cm.is_finite()) {
            return Err(bad("initial_pose.r_cm", format!("must be positive, got {}", p.r_cm)));
        }
        let initial_pose = RobotConfiguration::new(p.r_cm, p.theta_rad, p.alpha_rad);
        for (n, f) in self.faults.iter().enumerate() {
            if f.landmark == 0 || f.landmark > q {
                return Err(bad(
                    &format!("faults[{n}].landmark"),
                    format!("{} is outside 1..={q}", f.landmark),
                ));
            }
        }
        self.visibility
            .validate(q)
            .map_err(|e| bad("visibility", e.to_string()))?;
        if self.controller.v_const <= 0.0 {
            return Err(bad("controller.v_cm_s", "must be positive".into()));
        }
        if self.controller.home_radius <= 0.0 {
            return Err(bad("controller.home_radius_cm", "must be positive".into()));
        }
        if let Some(l) = self.controller.omega_limit {
            if !(l > 0.0) {
                return Err(bad("controller.omega_limit_rad_s", "must be positive".into()));
            }
        }
        let mut estimated: Vec<usize> = Vec::new();
        for &i in &self.aekf.estimate {
            if i == 0 || i > q {
                return Err(bad("aekf.estimate", format!("landmark {i} is outside 1..={q}")));
            }
            if estimated.contains(&(i - 1)) {
                return Err(bad("aekf.estimate", format!("landmark {i} listed twice")));
            }
            estimated.push(i - 1);
        }
        if self.filters.is_empty() {
            return Err(bad("filters", "at least one filter is required".into()));
        }
        let mut filters = Vec::new();
        let mut tunings = Vec::new();
        for name in &self.filters {
            let kind = match name.parse::<FilterKind>().map_err(|e| bad("filters", e.to_string()))? {
                FilterKind::Aekf { .. } => FilterKind::Aekf {
                    estimated: estimated.clone(),
                },
                k => k,
            };
            let n_ip = match &kind {
                FilterKind::Aekf { estimated } => estimated.len(),
                _ => 0,
            };
            tunings.push(self.tuning.resolve(q, n_ip)?);
            filters.push(kind);
        }
        let mode = match self.mode {
            ModeConfig::ClosedLoop => Mode::ClosedLoop,
            ModeConfig::OpenLoop { v_cm_s, omega_rad_s } => {
                Mode::OpenLoop(dynamics::ControlInput::new(v_cm_s, omega_rad_s))
            }
        };
        let noise_std = match self.measurement_noise_std_rad {
            Some(s) if s >= 0.0 && s.is_finite() => vec![s; q],
            Some(s) => return Err(bad("measurement_noise_std_rad", format!("must be non-negative, got {s}"))),
            None => (0..q).map(|i| tunings[0].r_full[(i, i)].max(0.0).sqrt()).collect(),
        };
        if self.seeds.replicates == 0 {
            return Err(bad("seeds.replicates", "must be at least 1".into()));
        }
        Ok(Scenario {
            name: self.name.clone(),
            dt: self.dt_s,
            max_steps: self.max_steps,
            q,
            landmarks,
            initial_pose,
            initial_offset: self.initial_estimate,
            faults: self.faults.clone(),
            visibility: self.visibility.clone(),
            noise_std,
            home_distance_source: self.home_distance_source,
            filters,
            tunings,
            mode,
            controller: self.controller,
            master_seed: self.seeds.master,
            replicates: self.seeds.replicates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[landmarks]
layout = "ring"
count = 7
radius_cm = 200.0
phase_rad = 0.4487989505128276
"#;

    #[test]
    fn defaults_are_reference_values() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let sc = cfg.resolve().unwrap();
        assert_eq!(sc.dt, 0.05);
        assert_eq!(sc.q, 7);
        assert_eq!(sc.initial_pose, RobotConfiguration::new(75.0, -0.872, 0.349));
        assert_eq!(sc.controller.v_const, 12.5);
        let t = &sc.tunings[0];
        assert_eq!(t, &FilterTuning::reference(7, 0));
        assert_eq!(sc.filters.len(), 3);
    }

    #[test]
    fn single_landmark_rejected() {
        let text = MINIMAL.replace("count = 7", "count = 1");
        let err = ScenarioConfig::from_toml(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("q ≥ 2"), "{err}");
    }

    #[test]
    fn unknown_key_is_reported() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn matrix_specs() {
        let m = MatrixSpec::Diagonal(vec![1.0, 2.0]).to_square("k", 2).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert!(MatrixSpec::Diagonal(vec![1.0]).to_square("k", 2).is_err());
        let f = MatrixSpec::Scalar(1.0).to_filled("k", 2, 3).unwrap();
        assert_eq!(f, DMatrix::from_element(2, 3, 1.0));
    }

    #[test]
    fn fault_application() {
        let f = Fault {
            landmark: 1,
            kind: FaultKind::Multiplicative,
            value: 1.3,
            onset_step: 0,
        };
        assert!((f.apply(0.5) - 0.65).abs() < 1e-15);
    }
}
