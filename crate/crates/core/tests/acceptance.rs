//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bearing_homing::angle;
use bearing_homing::cli::{cmd_run, RunArgs, MANIFEST_FILE};
use bearing_homing::dynamics::*;
use bearing_homing::harness::scenario::MatrixSpec;
use bearing_homing::harness::stats::rmse;
use bearing_homing::harness::*;
use bearing_homing::measurement::VisibilityPolicy;
use bearing_homing::observability::{observability_report, sample_generic_states, DEFAULT_RANK_TOL};
use common::*;
use rand::Rng;

fn bundled(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    ScenarioConfig::from_toml(&fs::read_to_string(path).unwrap()).unwrap()
}

fn pose_error(truth: &nalgebra::DVector<f64>, est: &nalgebra::DVector<f64>) -> f64 {
    let dr = truth[RANGE] - est[RANGE];
    let dt = angle::wrap(truth[THETA] - est[THETA]);
    let da = angle::wrap(truth[ALPHA] - est[ALPHA]);
    (dr * dr + dt * dt + da * da).sqrt()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn observability() -> Outcome {
    let start = Instant::now();
    let count = |q: usize, seed: u64| -> (usize, usize) {
        let (_, lm) = ring(q, 200.0, 0.4487989505128276);
        let mut full = 0;
        let mut max_rank = 0;
        for x in sample_generic_states(&lm, 100, 10.0, 150.0, seed) {
            let rep = observability_report(&x, &lm, DEFAULT_RANK_TOL).unwrap();
            full += (rep.rank == q + POSE_DIM) as usize;
            max_rank = max_rank.max(rep.rank);
        }
        (full, max_rank)
    };
    let (q7, _) = count(7, 1);
    let (q2, q2_max) = count(2, 2);
    let (_, q1_max) = count(1, 3);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        q7 >= 99 && q2 >= 99 && q1_max <= 4 && secs < 5.0,
        format!("q=7 rank 10 at {q7}/100; q=2 rank 5 at {q2}/100 (max rank {q2_max}); q=1 max rank {q1_max}; {secs:.2} s"),
    )
}

fn jacobians() -> Outcome {
    let mut r = rng(21);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        let q = r.random_range(2..=7);
        let g = random_geometry(&mut r, q, 30.0);
        let u = ControlInput::new(r.random_range(0.0..20.0), r.random_range(-2.0..2.0));
        let x = g.state.to_vector();
        let (gm, gu) = transition_jacobians(&g.state, u, &g.landmarks, 0.05).unwrap();
        let (go, guo) = forward_jacobian(&x, u, &g.landmarks, 0.05);
        for i in 0..gm.nrows() {
            let pairs = (0..gm.ncols())
                .map(|j| (gm[(i, j)], go[i][j]))
                .chain((0..2).map(|j| (gu[(i, j)], guo[i][j])));
            for (a, b) in pairs {
                if !jacobian_entry_close(a, b, x[i]) {
                    bad += 1;
                }
                if b.abs() > 1e-3 {
                    worst = worst.max(((a - b) / b).abs());
                }
            }
        }
    }
    outcome(bad == 0, format!("{bad} entries out of tolerance; worst relative error {worst:.2e}"))
}

fn geometry() -> Outcome {
    let mut r = rng(31);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = random_geometry(&mut r, 1, 5.0);
        let d = landmark_distance(&g.robot.polar_pose(), g.state.bearings[0], g.landmarks.beta_star[0]).unwrap();
        let truth = g.points[0][0].hypot(g.points[0][1]);
        worst = worst.max(((d - truth) / truth).abs());
    }
    // Drift along the true trajectories of the bundled closed-loop scenario.
    let mut cfg = bundled("case1");
    cfg.filters = vec!["ekf".into()];
    cfg.seeds.replicates = 5;
    let sc = cfg.resolve().unwrap();
    let mut drift: f64 = 0.0;
    for log in run_scenario(&sc) {
        for rec in &log.records {
            let pose = RobotConfiguration::new(rec.truth[RANGE], rec.truth[THETA], rec.truth[ALPHA]);
            for i in 0..sc.q {
                let beta = rec.truth[POSE_DIM + i];
                let den = (sc.landmarks.beta_star[i] - beta - pose.alpha).sin();
                if den.abs() < 0.05 || pose.range < 5.0 {
                    continue;
                }
                let d = landmark_distance(&pose, beta, sc.landmarks.beta_star[i]).unwrap();
                drift = drift.max(((d - sc.landmarks.d_star[i]) / sc.landmarks.d_star[i]).abs());
            }
        }
    }
    outcome(
        worst <= 1e-6 && drift <= 1e-6,
        format!("oracle max relative error {worst:.2e}; trajectory drift {drift:.2e}"),
    )
}

/// Closed-loop Case-1 runs reach home in a few hundred steps, so the 500-step
/// comparison drives the Case-1 setup with the constant input of Case 4.
fn reductions() -> Outcome {
    let mut cfg = bundled("case1");
    cfg.max_steps = 500;
    cfg.mode = bundled("case4").mode;
    cfg.filters = vec!["ekf".into(), "piekf".into(), "aekf".into()];
    cfg.tuning.forgetting = MatrixSpec::Scalar(0.0);
    cfg.aekf.estimate = vec![];
    let sc = cfg.resolve().unwrap();
    let mut worst: f64 = 0.0;
    let mut steps = usize::MAX;
    for seed in [1, 2, 3] {
        let ekf = run_replicate(&sc, 0, seed);
        for f in [1, 2] {
            let other = run_replicate(&sc, f, seed);
            steps = steps.min(other.records.len()).min(ekf.records.len());
            if other.records.len() != ekf.records.len() {
                worst = f64::INFINITY;
            }
            for (a, b) in ekf.records.iter().zip(&other.records) {
                worst = worst.max((&a.estimate - &b.estimate).amax());
                worst = worst.max((&a.p_diag - &b.p_diag).amax());
                worst = worst.max((&a.truth - &b.truth).amax());
            }
        }
    }
    outcome(
        worst <= 1e-12 && steps >= 500,
        format!("max difference {worst:.2e} over {steps} steps"),
    )
}

fn case1() -> Outcome {
    let sc = bundled("case1").resolve().unwrap();
    let logs = run_scenario(&sc);
    let mut good = 0;
    let mut homed = 0;
    let mut aborted = 0;
    for log in &logs {
        aborted += log.failure.is_some() as usize;
        let first = &log.records[0];
        let last = log.records.last().unwrap();
        let converged = log.failure.is_none()
            && pose_error(&last.truth, &last.estimate) < 0.2 * pose_error(&first.truth, &first.estimate);
        let home = log.failure.is_none() && log.termination.truth_step.is_some_and(|k| k as f64 * sc.dt <= 200.0);
        good += converged as usize;
        homed += home as usize;
    }
    let n = logs.len();
    outcome(
        good == n && homed == n,
        format!("{n} runs (3 filters x {} seeds): converged {good}, reached home {homed}, aborted {aborted}", sc.replicates),
    )
}

fn case2() -> Outcome {
    let start = Instant::now();
    let sc = bundled("case2").resolve().unwrap();
    let logs = run_scenario(&sc);
    let summary = aggregate_replicates(&logs);
    let secs = start.elapsed().as_secs_f64();
    let win = summary.win_rate("piekf", "ekf").unwrap_or(0.0);
    let ratio = summary.median_ratio("ekf", "piekf").unwrap_or(0.0);
    let aborted = logs.iter().filter(|l| l.failure.is_some()).count();
    outcome(
        sc.replicates >= 20 && win >= 0.8 && ratio > 2.0 && secs < 120.0,
        format!(
            "{} seeds: PI-EKF beats EKF in {:.0}%, median R RMSE ratio EKF/PI-EKF {ratio:.2}, {aborted} aborted runs, {secs:.1} s",
            sc.replicates,
            win * 100.0
        ),
    )
}

fn case3() -> Outcome {
    let sc = bundled("case3").resolve().unwrap();
    let logs = run_scenario(&sc);
    let slot = sc.q + POSE_DIM;
    let mut good = 0;
    let mut errors = Vec::new();
    for log in &logs {
        let last = log.records.last().unwrap();
        let truth = last.truth[slot];
        let rel = (angle::wrap(last.estimate[slot] - truth) / truth).abs();
        errors.push(rel);
        good += (log.failure.is_none() && rel <= 0.05) as usize;
    }
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    outcome(
        10 * good >= 7 * logs.len(),
        format!(
            "home bearing within 5% in {good}/{} seeds; median final relative error {:.1}%",
            logs.len(),
            median * 100.0
        ),
    )
}

fn case4() -> Outcome {
    let sc = bundled("case4").resolve().unwrap();
    let logs = run_scenario(&sc);
    let summary = aggregate_replicates(&logs);
    let mut pass = true;
    let mut parts = Vec::new();
    for f in &summary.filters {
        pass &= f.failed == 0 && f.mean[0] < 1.0 && f.mean[1] < 0.1 && f.mean[2] < 0.1;
        parts.push(format!(
            "{} R {:.3} cm, theta {:.4}, alpha {:.4} ({} aborted)",
            f.filter.display_name(),
            f.mean[0],
            f.mean[1],
            f.mean[2],
            f.failed
        ));
    }
    let worst = logs
        .iter()
        .filter(|l| l.failure.is_none())
        .map(|l| rmse(l).range())
        .fold(0.0, f64::max);
    outcome(pass, format!("mean RMSE: {}; worst single-run R {worst:.3} cm", parts.join("; ")))
}

/// Blackout early in the approach, while the robot is still far from home.
/// A filter survives when it is still running 20 steps after the blackout
/// with a finite estimate whose pose error is below 50.
fn blackout() -> Outcome {
    let (from, to) = (40u64, 99u64);
    let mut cfg = bundled("case2");
    cfg.visibility = VisibilityPolicy::Blackout {
        intervals: vec![[from, to]],
    };
    let sc = cfg.resolve().unwrap();
    let logs = run_scenario(&sc);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in &sc.filters {
        let mine: Vec<_> = logs.iter().filter(|l| &l.filter == kind).collect();
        let mut monotone = true;
        let mut survived = 0;
        for log in &mine {
            let window: Vec<_> = log.records.iter().filter(|r| (from..=to).contains(&r.step)).collect();
            for w in window.windows(2) {
                monotone &= w[1].p_diag.sum() >= w[0].p_diag.sum();
            }
            let after = log.records.iter().find(|r| r.step == to + 20);
            if let Some(r) = after {
                if r.estimate.iter().all(|v| v.is_finite()) && pose_error(&r.truth, &r.estimate) < 50.0 {
                    survived += 1;
                }
            }
        }
        pass &= monotone && survived == mine.len();
        parts.push(format!(
            "{} trace(P) non-decreasing {monotone}, survived {survived}/{}",
            kind.display_name(),
            mine.len()
        ));
    }
    outcome(pass, format!("{} measurement-free steps; {}", to - from + 1, parts.join("; ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bundled("case2");
    cfg.seeds.replicates = 4;
    let base = dir.path().join("case2.toml");
    fs::write(&base, cfg.to_toml()).unwrap();
    let run = |config: PathBuf, out: &str| {
        let args = RunArgs {
            config,
            seed: None,
            replicates: None,
            filter: None,
            out_dir: dir.path().join(out),
        };
        cmd_run(&args, &mut std::io::sink()).unwrap()
    };
    run(base, "first");
    let manifest = dir.path().join("first").join(MANIFEST_FILE);
    let a = run(manifest.clone(), "a");
    let b = run(manifest, "b");
    let mut identical = a.trajectories.len() == b.trajectories.len() && !a.trajectories.is_empty();
    for (x, y) in a.trajectories.iter().zip(&b.trajectories) {
        identical &= x.file_name() == y.file_name() && fs::read(x).unwrap() == fs::read(y).unwrap();
    }
    outcome(identical, format!("{} trajectory CSVs compared", a.trajectories.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("observability rank", observability),
        ("Jacobian oracle", jacobians),
        ("geometry oracle", geometry),
        ("filter reductions", reductions),
        ("Case-1 convergence", case1),
        ("Case-2 ordering", case2),
        ("Case-3 parameter convergence", case3),
        ("Case-4 magnitudes", case4),
        ("multi-rate blackout", blackout),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!("{} criterion {:2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
