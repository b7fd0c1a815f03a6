//! Cartesian oracle and random geometry shared by the integration tests.
#![allow(dead_code)]

use bearing_homing::dynamics::{integrate_step, AugmentedState, ControlInput, LandmarkSet, RobotConfiguration};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Robot in the plane: position (cm) and heading (rad). Home is the origin.
#[derive(Debug, Clone, Copy)]
pub struct Planar {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

pub fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

impl Planar {
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn polar_angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Bearing of `lm` from the heading.
    pub fn bearing(&self, lm: [f64; 2]) -> f64 {
        wrap((lm[1] - self.y).atan2(lm[0] - self.x) - self.heading)
    }

    pub fn polar_state(&self, landmarks: &[[f64; 2]]) -> Vec<f64> {
        let mut s = vec![self.range(), self.polar_angle(), wrap(self.heading)];
        s.extend(landmarks.iter().map(|l| self.bearing(*l)));
        s
    }

    /// Exact unicycle motion over `t` seconds at constant `(v, ω)`.
    pub fn advance(&self, v: f64, omega: f64, t: f64) -> Planar {
        if omega.abs() < 1e-12 {
            return Planar {
                x: self.x + v * t * self.heading.cos(),
                y: self.y + v * t * self.heading.sin(),
                heading: self.heading,
            };
        }
        let h1 = self.heading + omega * t;
        Planar {
            x: self.x + v / omega * (h1.sin() - self.heading.sin()),
            y: self.y - v / omega * (h1.cos() - self.heading.cos()),
            heading: h1,
        }
    }

    pub fn polar_pose(&self) -> RobotConfiguration {
        RobotConfiguration::new(self.range(), self.polar_angle(), self.heading)
    }
}

/// Analytic Cartesian rates of `[R, θ, α, β..]`.
pub fn cartesian_rates(p: &Planar, landmarks: &[[f64; 2]], u: ControlInput) -> Vec<f64> {
    let (vx, vy) = (u.v * p.heading.cos(), u.v * p.heading.sin());
    let r2 = p.x * p.x + p.y * p.y;
    let mut out = vec![(p.x * vx + p.y * vy) / r2.sqrt(), (p.x * vy - p.y * vx) / r2, u.omega];
    for l in landmarks {
        let (dx, dy) = (l[0] - p.x, l[1] - p.y);
        let phi_dot = (dx * -vy - dy * -vx) / (dx * dx + dy * dy);
        out.push(phi_dot - u.omega);
    }
    out
}

pub struct Geometry {
    pub robot: Planar,
    pub points: Vec<[f64; 2]>,
    pub landmarks: LandmarkSet,
    pub state: AugmentedState,
}

/// Random robot and `q` landmarks with every landmark at least `clearance`
/// cm from both home and the robot, and no landmark nearly collinear with
/// home and robot.
pub fn random_geometry(rng: &mut ChaCha8Rng, q: usize, clearance: f64) -> Geometry {
    loop {
        let r = rng.random_range(10.0..150.0);
        let th: f64 = rng.random_range(-PI..PI);
        let robot = Planar {
            x: r * th.cos(),
            y: r * th.sin(),
            heading: rng.random_range(-PI..PI),
        };
        let points: Vec<[f64; 2]> = (0..q)
            .map(|_| {
                let d = rng.random_range(100.0..300.0);
                let a: f64 = rng.random_range(-PI..PI);
                [d * a.cos(), d * a.sin()]
            })
            .collect();
        let ok = points.iter().all(|l| {
            let (dx, dy) = (l[0] - robot.x, l[1] - robot.y);
            let home_angle = l[1].atan2(l[0]);
            let seen = dy.atan2(dx);
            dx.hypot(dy) > clearance && (home_angle - seen).sin().abs() > 0.05
        });
        if !ok {
            continue;
        }
        let landmarks = LandmarkSet::from_positions(&points).unwrap();
        let s = robot.polar_state(&points);
        let state = AugmentedState::from_slice(&s).unwrap();
        return Geometry {
            robot,
            points,
            landmarks,
            state,
        };
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ring of `q` landmarks on a circle of `radius` cm around home.
pub fn ring(q: usize, radius: f64, phase: f64) -> (Vec<[f64; 2]>, LandmarkSet) {
    let pts: Vec<[f64; 2]> = (0..q)
        .map(|i| {
            let a = phase + 2.0 * PI * i as f64 / q as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    let lm = LandmarkSet::from_positions(&pts).unwrap();
    (pts, lm)
}

/// Forward differences at `h' = 1e-7` (scaled for large components),
/// written independently of the library's central-difference code.
pub fn forward_jacobian(x: &DVector<f64>, u: ControlInput, lm: &LandmarkSet, dt: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = x.len();
    let f0 = integrate_step(&AugmentedState::from_slice(x.as_slice()).unwrap(), u, lm, dt)
        .unwrap()
        .to_vector();
    let delta = |a: &DVector<f64>, i: usize| if i == 0 { a[i] - f0[i] } else { wrap(a[i] - f0[i]) };
    let mut g = vec![vec![0.0; n]; n];
    for j in 0..n {
        let h = 1e-7 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        let f = integrate_step(&AugmentedState::from_slice(xp.as_slice()).unwrap(), u, lm, dt)
            .unwrap()
            .to_vector();
        for i in 0..n {
            g[i][j] = delta(&f, i) / h;
        }
    }
    let mut gu = vec![vec![0.0; 2]; n];
    for j in 0..2 {
        let h = 1e-7;
        let up = if j == 0 {
            ControlInput::new(u.v + h, u.omega)
        } else {
            ControlInput::new(u.v, u.omega + h)
        };
        let f = integrate_step(&AugmentedState::from_slice(x.as_slice()).unwrap(), up, lm, dt)
            .unwrap()
            .to_vector();
        for i in 0..n {
            gu[i][j] = delta(&f, i) / h;
        }
    }
    (g, gu)
}

/// Relative error per entry. Forward-difference round-off grows with the
/// magnitude of the output component, so tiny entries are compared against
/// `1e-3 · max(1, |f_i|)` instead of themselves.
pub fn jacobian_entry_close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-4 * b.abs().max(1e-3 * scale.abs().max(1.0))
}
