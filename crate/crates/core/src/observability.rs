//! Local observability of the bearing model through first-order Lie derivatives.
//!
//! With the drift split as `g(X, U) = g₁ v + g₂ ω`, the stacked gradient matrix
//! is `[∇L⁰h; ∇L¹_{g₁}h; ∇L¹_{g₂}h]`. The home distance of every landmark is
//! eliminated through the sine rule, so `d_i = R sin(β*_i − θ) / S*_i` and the
//! scalar Lie derivative along `g₁` is `−sin β_i / d_i`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::dynamics::{self, AugmentedState, Guards, LandmarkSet, RobotConfiguration, POSE_DIM};
use crate::error::{HomingError, Result};
use crate::measurement::full_h;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub observable: bool,
    pub q: usize,
    pub state_sample: AugmentedState,
}

/// `∇L⁰h = [0_{q×3} I_q]`.
pub fn lie_block_l0(q: usize) -> DMatrix<f64> {
    full_h(q)
}

/// Trigonometric shorthand for one landmark at a state.
struct Terms {
    /// sin β_i, cos β_i
    s: f64,
    c: f64,
    /// sin/cos(θ − (β_i + α))
    big_s: f64,
    big_c: f64,
    /// sin/cos(β*_i − (β_i + α))
    s_star: f64,
    c_star: f64,
    d: f64,
}

fn terms(x: &AugmentedState, beta_star: f64, i: usize, eps_den: f64) -> Result<Terms> {
    let beta = x.bearings[i];
    let phi = beta + x.pose.alpha;
    let s_star = (beta_star - phi).sin();
    if s_star.abs() <= eps_den {
        return Err(HomingError::DegenerateGeometry {
            landmark: i + 1,
            denominator: s_star,
        });
    }
    let big_s = (x.pose.theta - phi).sin();
    let big_c = (x.pose.theta - phi).cos();
    let c_star = (beta_star - phi).cos();
    let d_home = x.pose.range * big_s / s_star;
    let d = x.pose.range * big_c - d_home * c_star;
    if d.abs() <= eps_den {
        return Err(HomingError::DegenerateGeometry {
            landmark: i + 1,
            denominator: d,
        });
    }
    Ok(Terms {
        s: beta.sin(),
        c: beta.cos(),
        big_s,
        big_c,
        s_star,
        c_star,
        d,
    })
}

/// Scalar Lie derivatives `L¹_{g₁}h_i = −sin β_i / d_i`, one per landmark.
pub fn lie_derivative_g1(x: &AugmentedState, landmarks: &LandmarkSet) -> Result<Vec<f64>> {
    let eps = Guards::default().eps_den;
    (0..x.landmark_count())
        .map(|i| terms(x, landmarks.beta_star[i], i, eps).map(|t| -t.s / t.d))
        .collect()
}

/// `∇L¹_{g₁}h`: row `i` is `[J_i, K_i, P_i, 0.., Q_i, ..0]` with `Q_i` in the
/// column of `β_i`.
pub fn lie_block_l1g1(x: &AugmentedState, landmarks: &LandmarkSet) -> Result<DMatrix<f64>> {
    let q = x.landmark_count();
    check_dims(x, landmarks)?;
    let eps = Guards::default().eps_den;
    let r = x.pose.range;
    let mut block = DMatrix::zeros(q, POSE_DIM + q);
    for i in 0..q {
        let t = terms(x, landmarks.beta_star[i], i, eps)?;
        let d_home = r * t.big_s / t.s_star;
        let d2 = t.d * t.d;
        block[(i, 0)] = t.s * (t.big_c - t.c_star * d_home / r) / d2;
        block[(i, 1)] = -r * t.s * (t.big_s + t.big_c * t.c_star / t.s_star) / d2;
        block[(i, 2)] = t.s * t.c_star / (t.s_star * t.d);
        block[(i, POSE_DIM + i)] = -t.c / t.d + t.s * t.c_star / (t.s_star * t.d);
    }
    Ok(block)
}

/// `∇L¹_{g₂}h`. The Lie derivative along `g₂` is the constant `−1`.
pub fn lie_block_l1g2(q: usize) -> DMatrix<f64> {
    DMatrix::zeros(q, POSE_DIM + q)
}

fn check_dims(x: &AugmentedState, landmarks: &LandmarkSet) -> Result<()> {
    if x.landmark_count() != landmarks.len() {
        return Err(HomingError::Dimension(format!(
            "state carries {} bearings but {} landmarks are configured",
            x.landmark_count(),
            landmarks.len()
        )));
    }
    Ok(())
}

/// The stacked `3q × (q+3)` observability matrix.
pub fn observability_matrix(x: &AugmentedState, landmarks: &LandmarkSet) -> Result<DMatrix<f64>> {
    let q = x.landmark_count();
    let l1 = lie_block_l1g1(x, landmarks)?;
    let mut o = DMatrix::zeros(3 * q, POSE_DIM + q);
    o.rows_mut(0, q).copy_from(&lie_block_l0(q));
    o.rows_mut(q, q).copy_from(&l1);
    o.rows_mut(2 * q, q).copy_from(&lie_block_l1g2(q));
    Ok(o)
}

/// Numeric rank of the observability matrix: singular values at or above
/// `tol · σ_max` count.
pub fn observability_report(
    x: &AugmentedState,
    landmarks: &LandmarkSet,
    tol: f64,
) -> Result<ObservabilityReport> {
    let q = x.landmark_count();
    let o = observability_matrix(x, landmarks)?;
    let mut sv: Vec<f64> = o.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| **s > 0.0 && **s >= tol * max).count();
    Ok(ObservabilityReport {
        rank,
        singular_values: sv,
        observable: rank == q + POSE_DIM,
        q,
        state_sample: x.clone(),
    })
}

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Draws `count` geometrically consistent states around `landmarks`: range
/// uniform in `[range_min, range_max]` cm, polar angle and heading uniform,
/// bearings from the landmark geometry. States that trip a singularity guard
/// are redrawn.
pub fn sample_generic_states(
    landmarks: &LandmarkSet,
    count: usize,
    range_min: f64,
    range_max: f64,
    seed: u64,
) -> Vec<AugmentedState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let pose = RobotConfiguration::new(
            rng.random_range(range_min..=range_max),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        );
        let x = AugmentedState::new(pose, dynamics::bearings_from_pose(&pose, landmarks));
        if lie_block_l1g1(&x, landmarks).is_ok() {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring(q: usize) -> LandmarkSet {
        let pts: Vec<[f64; 2]> = (0..q)
            .map(|i| {
                let a = PI / 7.0 + 2.0 * PI * i as f64 / q as f64;
                [200.0 * a.cos(), 200.0 * a.sin()]
            })
            .collect();
        LandmarkSet::from_positions(&pts).unwrap()
    }

    #[test]
    fn zeroth_block() {
        assert_eq!(lie_block_l0(2), full_h(2));
        assert_eq!(lie_block_l0(1).shape(), (1, 4));
        for q in 1..=10 {
            assert_eq!(lie_block_l0(q), full_h(q));
        }
    }

    #[test]
    fn zero_bearing_row() {
        let lm = LandmarkSet::new(vec![0.7], vec![150.0]).unwrap();
        let x = AugmentedState::new(RobotConfiguration::new(60.0, -1.0, 0.4), vec![0.0]);
        let b = lie_block_l1g1(&x, &lm).unwrap();
        let t = terms(&x, 0.7, 0, 1e-9).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
        assert_eq!(b[(0, 1)], 0.0);
        assert_eq!(b[(0, 2)], 0.0);
        assert_relative_eq!(b[(0, 3)], -1.0 / t.d, epsilon = 1e-15);
    }

    #[test]
    fn g2_block_is_zero() {
        assert!(lie_block_l1g2(4).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stacked_first_rows_equal_h() {
        let lm = ring(5);
        for x in sample_generic_states(&lm, 20, 20.0, 150.0, 9) {
            let o = observability_matrix(&x, &lm).unwrap();
            assert_eq!(o.rows(0, 5).into_owned(), full_h(5));
        }
    }

    #[test]
    fn rank_for_seven_landmarks() {
        let lm = ring(7);
        let x = &sample_generic_states(&lm, 1, 20.0, 150.0, 1)[0];
        let rep = observability_report(x, &lm, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rep.rank, 10);
        assert!(rep.observable);
        assert!(rep.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn single_landmark_is_not_observable() {
        let lm = ring(1);
        for x in sample_generic_states(&lm, 50, 20.0, 150.0, 2) {
            let rep = observability_report(&x, &lm, DEFAULT_RANK_TOL).unwrap();
            assert!(rep.rank <= 4);
            assert!(!rep.observable);
        }
    }

    #[test]
    fn rank_invariant_under_relabeling() {
        let lm = ring(5);
        let x = &sample_generic_states(&lm, 1, 20.0, 150.0, 5)[0];
        let perm = [3usize, 0, 4, 1, 2];
        let lm2 = LandmarkSet::new(
            perm.iter().map(|&i| lm.beta_star[i]).collect(),
            perm.iter().map(|&i| lm.d_star[i]).collect(),
        )
        .unwrap();
        let x2 = AugmentedState::new(x.pose, perm.iter().map(|&i| x.bearings[i]).collect());
        let a = observability_report(x, &lm, DEFAULT_RANK_TOL).unwrap();
        let b = observability_report(&x2, &lm2, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(a.rank, b.rank);
        for (u, v) in a.singular_values.iter().zip(&b.singular_values) {
            assert_relative_eq!(u, v, max_relative = 1e-9);
        }
    }
}
