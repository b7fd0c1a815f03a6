use std::ffi::{CStr, CString};
use std::ptr;

use bearing_homing_ffi::*;

const SCENARIO: &str = r#"
name = "ffi"
max_steps = 40
filters = ["ekf", "piekf"]
measurement_noise_std_rad = 0.0
[landmarks]
layout = "ring"
count = 5
radius_cm = 200.0
phase_rad = 0.3
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bh_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn scenario(text: &str) -> *mut BhScenario {
    let c = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { bh_scenario_from_toml(c.as_ptr(), &mut sc) }, BhStatus::Ok);
    sc
}

#[test]
fn home_distance_from_bearing() {
    // Robot at (0, -50), landmark at (100, 0): D* = 100.
    let (r, theta, alpha) = (50.0, -std::f64::consts::FRAC_PI_2, 0.0);
    let beta = (50.0f64).atan2(100.0);
    let mut d = 0.0;
    let s = unsafe { bh_landmark_distance(r, theta, alpha, beta, 0.0, &mut d) };
    assert_eq!(s, BhStatus::Ok);
    assert!((d - 100.0).abs() < 1e-9, "{d}");
}

#[test]
fn degenerate_geometry_sets_message() {
    let mut d = 0.0;
    // Landmark bearing aligned with the home direction: sine rule breaks down.
    let s = unsafe { bh_landmark_distance(50.0, 0.3, 0.0, 0.3, 0.3, &mut d) };
    assert_eq!(s, BhStatus::DegenerateGeometry);
    assert!(!last_error().is_empty());
}

#[test]
fn null_output_is_rejected() {
    let s = unsafe { bh_landmark_distance(50.0, 0.3, 0.0, 0.1, 1.0, ptr::null_mut()) };
    assert_eq!(s, BhStatus::NullPointer);
}

#[test]
fn omega_law() {
    let w = bh_homing_omega(0.349, -0.872, 0.0);
    assert!((w - 1.9206).abs() < 1e-4);
    assert_eq!(bh_homing_omega(0.349, -0.872, 0.5), 0.5);
}

#[test]
fn observability_rank_matches_landmark_count() {
    let bs = [0.3, 1.5, 2.8, -2.0, -0.9];
    let ds = [200.0, 180.0, 220.0, 150.0, 210.0];
    let mut rank = 0usize;
    let s = unsafe { bh_observability_rank(bs.as_ptr(), ds.as_ptr(), 5, 60.0, -0.8, 0.4, &mut rank) };
    assert_eq!(s, BhStatus::Ok);
    assert_eq!(rank, 8);
    let s = unsafe { bh_observability_rank(bs.as_ptr(), ds.as_ptr(), 1, 60.0, -0.8, 0.4, &mut rank) };
    assert_eq!(s, BhStatus::Ok);
    assert!(rank <= 4);
}

#[test]
fn bad_scenario_reports_key() {
    let c = CString::new(SCENARIO.replace("count = 5", "count = 1")).unwrap();
    let mut sc = ptr::null_mut();
    let s = unsafe { bh_scenario_from_toml(c.as_ptr(), &mut sc) };
    assert_eq!(s, BhStatus::InvalidScenario);
    assert!(sc.is_null());
    assert!(last_error().contains("landmarks"), "{}", last_error());
}

#[test]
fn replicate_round_trip() {
    let sc = scenario(SCENARIO);
    unsafe {
        assert_eq!(bh_scenario_landmark_count(sc), 5);
        assert_eq!(bh_scenario_filter_count(sc), 2);
        let mut t = ptr::null_mut();
        assert_eq!(bh_run_replicate(sc, 1, 3, &mut t), BhStatus::Ok);
        assert_eq!(bh_trajectory_failed(t), 0);
        assert_eq!(bh_trajectory_len(t), 40);
        let n = bh_trajectory_dim(t);
        assert_eq!(n, 8);
        let mut truth = vec![0.0; n];
        let mut est = vec![0.0; n];
        assert_eq!(bh_trajectory_record(t, 39, truth.as_mut_ptr(), est.as_mut_ptr(), n), BhStatus::Ok);
        for (a, b) in truth.iter().zip(&est) {
            assert!((a - b).abs() < 1e-6);
        }
        let mut rm = vec![1.0; n];
        assert_eq!(bh_trajectory_rmse(t, rm.as_mut_ptr(), n), BhStatus::Ok);
        assert!(rm.iter().all(|v| *v < 1e-6));
        assert_eq!(
            bh_trajectory_record(t, 40, truth.as_mut_ptr(), est.as_mut_ptr(), n),
            BhStatus::InvalidArgument
        );
        assert_eq!(bh_trajectory_record(t, 0, truth.as_mut_ptr(), est.as_mut_ptr(), 3), BhStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(bh_trajectory_write_csv(t, cpath.as_ptr()), BhStatus::Ok);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 41);

        let mut none = ptr::null_mut();
        assert_eq!(bh_run_replicate(sc, 2, 3, &mut none), BhStatus::InvalidArgument);
        assert!(none.is_null());
        bh_trajectory_free(t);
        bh_scenario_free(sc);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        bh_scenario_free(ptr::null_mut());
        bh_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/bearing_homing.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["bh_scenario_from_toml", "bh_run_replicate", "bh_trajectory_free", "bh_last_error_message"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", header])
        .output()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
