//! The simulation loop.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controller::{homing_done, homing_omega};
use crate::dynamics::{self, AugmentedState, ControlInput, LandmarkSet, RobotConfiguration, ALPHA, RANGE, THETA};
use crate::error::Result;
use crate::filters::{Estimator, FilterKind, FilterTuning};
use crate::measurement::{schedule_visibility, synthesize_measurement, Measurement, VisibilityPolicy};
use crate::observability::{observability_report, DEFAULT_RANK_TOL};

use super::log::{StepRecord, Termination, TrajectoryLog};
use super::scenario::{HomeDistanceSource, Mode, Scenario};

/// Seed of replicate `r`.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    master.wrapping_add(r as u64)
}

/// True state at the start of a run.
pub fn initial_truth(sc: &Scenario) -> AugmentedState {
    let pose = sc.initial_pose;
    AugmentedState::new(pose, dynamics::bearings_from_pose(&pose, &sc.landmarks))
}

/// Home distances the filters start with: the noise-free initial bearings and
/// true home bearings, evaluated at the pose selected by
/// `home_distance_source`.
pub fn initial_home_distances(sc: &Scenario) -> Result<Vec<f64>> {
    let truth = initial_truth(sc);
    let pose = match sc.home_distance_source {
        HomeDistanceSource::TruePose => truth.pose,
        HomeDistanceSource::InitialEstimate => offset_pose(sc),
    };
    sc.landmarks
        .beta_star
        .iter()
        .zip(&truth.bearings)
        .enumerate()
        .map(|(i, (bs, b))| {
            let d = dynamics::landmark_distance(&pose, *b, *bs).map_err(|e| match e {
                crate::HomingError::DegenerateGeometry { denominator, .. } => {
                    crate::HomingError::DegenerateGeometry {
                        landmark: i + 1,
                        denominator,
                    }
                }
                other => other,
            })?;
            if d > 0.0 && d.is_finite() {
                Ok(d)
            } else {
                Err(crate::HomingError::InvalidScenario(format!(
                    "landmark {}: home distance {d} from the initial pose is not positive",
                    i + 1
                )))
            }
        })
        .collect()
}

fn offset_pose(sc: &Scenario) -> RobotConfiguration {
    let o = sc.initial_offset;
    let p = sc.initial_pose;
    RobotConfiguration::new(p.range + o.dr_cm, p.theta + o.dtheta_rad, p.alpha + o.dalpha_rad)
}

/// Landmark map the filters start with: initial home distances and the home
/// bearings with every fault of onset 0 applied.
pub fn filter_landmarks(sc: &Scenario) -> Result<LandmarkSet> {
    let d_star = initial_home_distances(sc)?;
    let mut beta_star = sc.landmarks.beta_star.clone();
    for f in sc.faults.iter().filter(|f| f.onset_step == 0) {
        beta_star[f.landmark - 1] = f.apply(beta_star[f.landmark - 1]);
    }
    LandmarkSet::new(beta_star, d_star)
}

/// Initial estimate: the offset pose, with bearings computed from it and the
/// filter's landmark map.
pub fn initial_estimate(sc: &Scenario, filter_map: &LandmarkSet) -> AugmentedState {
    let pose = offset_pose(sc);
    AugmentedState::new(pose, dynamics::bearings_from_pose(&pose, filter_map))
}

fn visibility_for_replicate(policy: &VisibilityPolicy, seed: u64) -> VisibilityPolicy {
    match policy {
        VisibilityPolicy::RandomSubset { p_min, p_max, seed: s } => VisibilityPolicy::RandomSubset {
            p_min: *p_min,
            p_max: *p_max,
            seed: s ^ seed.rotate_left(32),
        },
        other => other.clone(),
    }
}

/// Checks the local rank condition at the initial pose. Returns a warning
/// when it fails.
pub fn initial_observability_warning(sc: &Scenario) -> Option<String> {
    let truth = initial_truth(sc);
    match observability_report(&truth, &sc.landmarks, DEFAULT_RANK_TOL) {
        Ok(rep) if rep.observable => None,
        Ok(rep) => Some(format!(
            "observability rank {} < {} at the initial pose",
            rep.rank,
            sc.q + dynamics::POSE_DIM
        )),
        Err(e) => Some(format!("observability check failed at the initial pose: {e}")),
    }
}

/// Runs one replicate of one filter. Singularities abort the replicate: the
/// partial log is returned with `failure` set.
pub fn run_replicate(sc: &Scenario, filter_index: usize, seed: u64) -> TrajectoryLog {
    let kind = sc.filters[filter_index].clone();
    let tuning = sc.tunings[filter_index].clone();
    let mut log = TrajectoryLog {
        scenario: sc.name.clone(),
        filter: kind.clone(),
        seed,
        q: sc.q,
        records: Vec::new(),
        termination: Termination::default(),
        failure: None,
    };
    if let Err(e) = simulate(sc, kind, tuning, seed, &mut log) {
        log.failure = Some(format!("step {}: {e}", log.records.len()));
    }
    log
}

fn simulate(
    sc: &Scenario,
    kind: FilterKind,
    tuning: FilterTuning,
    seed: u64,
    log: &mut TrajectoryLog,
) -> Result<()> {
    let mut truth = initial_truth(sc);
    let filter_map = filter_landmarks(sc)?;
    let x0 = initial_estimate(sc, &filter_map);
    let estimated: Vec<usize> = match &kind {
        FilterKind::Aekf { estimated } => estimated.clone(),
        _ => Vec::new(),
    };
    let initial_params: Vec<f64> = estimated.iter().map(|&i| filter_map.beta_star[i]).collect();
    let true_params: Vec<f64> = estimated.iter().map(|&i| sc.landmarks.beta_star[i]).collect();
    let mut est = Estimator::new(kind, &x0, tuning.clone(), filter_map, &initial_params)?;

    let policy = visibility_for_replicate(&sc.visibility, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for k in 0..sc.max_steps {
        for f in sc.faults.iter().filter(|f| f.onset_step == k && k > 0) {
            let i = f.landmark - 1;
            est.set_home_bearing(i, f.apply(sc.landmarks.beta_star[i]));
        }
        let mask = schedule_visibility(k, &policy, &truth.bearings)?;
        let meas: Measurement = synthesize_measurement(&truth, &mask, &sc.noise_std, k, &mut rng);
        let innovation = est.update(&meas)?;

        let fs = est.state();
        let u = match sc.mode {
            Mode::ClosedLoop => ControlInput::new(
                sc.controller.v_const,
                homing_omega(fs.x_hat[ALPHA], fs.x_hat[THETA], sc.controller.omega_limit),
            ),
            Mode::OpenLoop(u) => u,
        };

        let mut truth_vec = truth.to_vector();
        if !true_params.is_empty() {
            truth_vec = DVector::from_iterator(
                truth_vec.len() + true_params.len(),
                truth_vec.iter().chain(&true_params).copied(),
            );
        }
        log.records.push(StepRecord {
            step: k,
            time: k as f64 * sc.dt,
            truth: truth_vec,
            estimate: fs.x_hat.clone(),
            p_diag: fs.p.diagonal(),
            mask,
            measurement: meas.values.clone(),
            innovation,
            omega: u.omega,
            kappa: fs.kappa.clone(),
        });
        if log.termination.estimate_step.is_none() && fs.x_hat[RANGE] < sc.controller.home_radius {
            log.termination.estimate_step = Some(k);
        }
        if homing_done(&truth.pose, &sc.controller) {
            log.termination.truth_step.get_or_insert(k);
            if sc.mode == Mode::ClosedLoop {
                break;
            }
        }
        if k + 1 == sc.max_steps {
            break;
        }
        truth = dynamics::integrate_step(&truth, u, &sc.landmarks, sc.dt)?;
        est.predict(u, sc.dt)?;
    }
    Ok(())
}

/// Every replicate of every filter, ordered by replicate then filter.
/// Replicates run in parallel; the output order does not depend on
/// scheduling.
pub fn run_scenario(sc: &Scenario) -> Vec<TrajectoryLog> {
    let jobs: Vec<(usize, usize)> = (0..sc.replicates)
        .flat_map(|r| (0..sc.filters.len()).map(move |f| (r, f)))
        .collect();
    jobs.par_iter()
        .map(|&(r, f)| run_replicate(sc, f, replicate_seed(sc.master_seed, r)))
        .collect()
}

/// Open-loop tuning helper used by tests: the reference tuning for `q`
/// landmarks with the A-EKF parameter count of `kind`.
pub fn reference_tuning(q: usize, kind: &FilterKind) -> FilterTuning {
    let n_ip = match kind {
        FilterKind::Aekf { estimated } => estimated.len(),
        _ => 0,
    };
    FilterTuning::reference(q, n_ip)
}
