//! C ABI over `bearing_homing`.
//!
//! Scenarios and trajectories cross the boundary as opaque handles owned by
//! the caller and released with the matching `*_free`. Every fallible call
//! returns a [`BhStatus`]; on failure [`bh_last_error_message`] describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bearing_homing::controller::homing_omega;
use bearing_homing::dynamics::{landmark_distance, AugmentedState, LandmarkSet, RobotConfiguration};
use bearing_homing::harness::stats::rmse;
use bearing_homing::harness::{run_replicate, Scenario, ScenarioConfig, TrajectoryLog};
use bearing_homing::observability::{observability_report, DEFAULT_RANK_TOL};
use bearing_homing::HomingError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidScenario = 3,
    NearHomeSingularity = 4,
    DegenerateGeometry = 5,
    IllConditioned = 6,
    Io = 7,
    Panic = 8,
}

/// A validated scenario.
pub struct BhScenario {
    inner: Scenario,
}

/// One simulated replicate.
pub struct BhTrajectory {
    inner: TrajectoryLog,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &HomingError) -> BhStatus {
    match e {
        HomingError::NearHomeSingularity { .. } => BhStatus::NearHomeSingularity,
        HomingError::DegenerateGeometry { .. } => BhStatus::DegenerateGeometry,
        HomingError::IllConditionedInnovation { .. } => BhStatus::IllConditioned,
        HomingError::Dimension(_) => BhStatus::InvalidArgument,
        HomingError::InvalidPolicy(_) | HomingError::InvalidScenario(_) => BhStatus::InvalidScenario,
    }
}

fn fail(status: BhStatus, msg: impl Into<String>) -> BhStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> BhStatus) -> BhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == BhStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(BhStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn bh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Home distance `D*` of a landmark seen at bearing `beta` from the pose
/// `(r, theta, alpha)`, given its home bearing `beta_star`.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bh_landmark_distance(
    r: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    beta_star: f64,
    out: *mut f64,
) -> BhStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BhStatus::NullPointer, "out is null");
        }
        let pose = RobotConfiguration::new(r, theta, alpha);
        match landmark_distance(&pose, beta, beta_star) {
            Ok(d) => {
                *out = d;
                BhStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Homing law `ω = π − wrap(α̂ − θ̂)`. A non-positive `omega_limit` means no
/// saturation.
#[no_mangle]
pub extern "C" fn bh_homing_omega(alpha_hat: f64, theta_hat: f64, omega_limit: f64) -> f64 {
    let limit = (omega_limit > 0.0).then_some(omega_limit);
    homing_omega(alpha_hat, theta_hat, limit)
}

/// Numeric rank of the observability matrix at the pose `(r, theta, alpha)`
/// for `q` landmarks given by home bearings and home distances. Bearings are
/// computed from the geometry.
///
/// # Safety
/// `beta_star` and `d_star` must point to `q` doubles; `rank_out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bh_observability_rank(
    beta_star: *const f64,
    d_star: *const f64,
    q: usize,
    r: f64,
    theta: f64,
    alpha: f64,
    rank_out: *mut usize,
) -> BhStatus {
    guarded(|| {
        if beta_star.is_null() || d_star.is_null() || rank_out.is_null() {
            return fail(BhStatus::NullPointer, "null argument");
        }
        if q == 0 {
            return fail(BhStatus::InvalidArgument, "q must be at least 1");
        }
        let bs = std::slice::from_raw_parts(beta_star, q).to_vec();
        let ds = std::slice::from_raw_parts(d_star, q).to_vec();
        let lm = match LandmarkSet::new(bs, ds) {
            Ok(l) => l,
            Err(e) => return fail(status_of(&e), e.to_string()),
        };
        let pose = RobotConfiguration::new(r, theta, alpha);
        let x = AugmentedState::new(pose, bearing_homing::dynamics::bearings_from_pose(&pose, &lm));
        match observability_report(&x, &lm, DEFAULT_RANK_TOL) {
            Ok(rep) => {
                *rank_out = rep.rank;
                BhStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable. The handle
/// written to `out` must be released with [`bh_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn bh_scenario_from_toml(toml: *const c_char, out: *mut *mut BhScenario) -> BhStatus {
    guarded(|| {
        if toml.is_null() || out.is_null() {
            return fail(BhStatus::NullPointer, "null argument");
        }
        *out = std::ptr::null_mut();
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(t) => t,
            Err(_) => return fail(BhStatus::InvalidArgument, "config is not UTF-8"),
        };
        match ScenarioConfig::from_toml(text).and_then(|c| c.resolve()) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(BhScenario { inner: sc }));
                BhStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `sc` must be null or a handle from [`bh_scenario_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_scenario_free(sc: *mut BhScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn bh_scenario_landmark_count(sc: *const BhScenario) -> usize {
    sc.as_ref().map_or(0, |s| s.inner.q)
}

/// Number of filters configured; valid `filter_index` values are below it.
///
/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn bh_scenario_filter_count(sc: *const BhScenario) -> usize {
    sc.as_ref().map_or(0, |s| s.inner.filters.len())
}

/// Simulates one replicate. A run aborted by a filter singularity still
/// yields a trajectory; see [`bh_trajectory_failed`].
///
/// # Safety
/// `sc` must be a live scenario handle and `out` writable. The handle written
/// to `out` must be released with [`bh_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn bh_run_replicate(
    sc: *const BhScenario,
    filter_index: usize,
    seed: u64,
    out: *mut *mut BhTrajectory,
) -> BhStatus {
    guarded(|| {
        let Some(s) = sc.as_ref() else {
            return fail(BhStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(BhStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        if filter_index >= s.inner.filters.len() {
            return fail(
                BhStatus::InvalidArgument,
                format!("filter index {filter_index} out of range"),
            );
        }
        let log = run_replicate(&s.inner, filter_index, seed);
        *out = Box::into_raw(Box::new(BhTrajectory { inner: log }));
        BhStatus::Ok
    })
}

/// # Safety
/// `t` must be null or a handle from [`bh_run_replicate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_free(t: *mut BhTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of records.
///
/// # Safety
/// `t` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_len(t: *const BhTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.inner.records.len())
}

/// Length of the truth and estimate vectors of each record.
///
/// # Safety
/// `t` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_dim(t: *const BhTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.inner.component_names().len())
}

/// 1 if the replicate was aborted, 0 otherwise (also for a null handle).
///
/// # Safety
/// `t` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_failed(t: *const BhTrajectory) -> i32 {
    t.as_ref().map_or(0, |t| t.inner.failure.is_some() as i32)
}

/// Copies record `k` into `truth` and `estimate`, each of length `len`
/// (must equal [`bh_trajectory_dim`]).
///
/// # Safety
/// `t` must be a live trajectory handle; `truth` and `estimate` must point to
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_record(
    t: *const BhTrajectory,
    k: usize,
    truth: *mut f64,
    estimate: *mut f64,
    len: usize,
) -> BhStatus {
    guarded(|| {
        let Some(t) = t.as_ref() else {
            return fail(BhStatus::NullPointer, "trajectory is null");
        };
        if truth.is_null() || estimate.is_null() {
            return fail(BhStatus::NullPointer, "output buffer is null");
        }
        let Some(rec) = t.inner.records.get(k) else {
            return fail(BhStatus::InvalidArgument, format!("record {k} out of range"));
        };
        if len != rec.truth.len() {
            return fail(
                BhStatus::InvalidArgument,
                format!("buffer length {len}, record length {}", rec.truth.len()),
            );
        }
        std::slice::from_raw_parts_mut(truth, len).copy_from_slice(rec.truth.as_slice());
        std::slice::from_raw_parts_mut(estimate, len).copy_from_slice(rec.estimate.as_slice());
        BhStatus::Ok
    })
}

/// Per-component RMSE into `out` (length [`bh_trajectory_dim`]).
///
/// # Safety
/// `t` must be a live trajectory handle; `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_rmse(t: *const BhTrajectory, out: *mut f64, len: usize) -> BhStatus {
    guarded(|| {
        let Some(t) = t.as_ref() else {
            return fail(BhStatus::NullPointer, "trajectory is null");
        };
        if out.is_null() {
            return fail(BhStatus::NullPointer, "out is null");
        }
        if t.inner.records.is_empty() {
            return fail(BhStatus::InvalidArgument, "trajectory has no records");
        }
        let r = rmse(&t.inner);
        if len != r.values.len() {
            return fail(
                BhStatus::InvalidArgument,
                format!("buffer length {len}, expected {}", r.values.len()),
            );
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&r.values);
        BhStatus::Ok
    })
}

/// Writes the trajectory CSV to `path`.
///
/// # Safety
/// `t` must be a live trajectory handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bh_trajectory_write_csv(t: *const BhTrajectory, path: *const c_char) -> BhStatus {
    guarded(|| {
        let Some(t) = t.as_ref() else {
            return fail(BhStatus::NullPointer, "trajectory is null");
        };
        if path.is_null() {
            return fail(BhStatus::NullPointer, "path is null");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(BhStatus::InvalidArgument, "path is not UTF-8");
        };
        let file = match std::fs::File::create(Path::new(p)) {
            Ok(f) => f,
            Err(e) => return fail(BhStatus::Io, format!("{p}: {e}")),
        };
        match t.inner.write_csv(std::io::BufWriter::new(file)) {
            Ok(()) => BhStatus::Ok,
            Err(e) => fail(BhStatus::Io, e.to_string()),
        }
    })
}
