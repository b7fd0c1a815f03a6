//! Proportional homing law on the estimated heading and polar angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dynamics::RobotConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Constant forward speed.
    #[serde(rename = "v_cm_s", default = "default_v")]
    pub v_const: f64,
    /// Homing is complete below this range.
    #[serde(rename = "home_radius_cm", default = "default_radius")]
    pub home_radius: f64,
    #[serde(rename = "omega_limit_rad_s", default, skip_serializing_if = "Option::is_none")]
    pub omega_limit: Option<f64>,
}

fn default_v() -> f64 {
    12.5
}

fn default_radius() -> f64 {
    5.0
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            v_const: default_v(),
            home_radius: default_radius(),
            omega_limit: None,
        }
    }
}

/// `ω = π − wrap(α̂ − θ̂)`, saturated to `±omega_limit` when set.
pub fn homing_omega(alpha_hat: f64, theta_hat: f64, omega_limit: Option<f64>) -> f64 {
    let omega = PI - angle::diff(alpha_hat, theta_hat);
    match omega_limit {
        Some(limit) => omega.clamp(-limit, limit),
        None => omega,
    }
}

pub fn homing_done(pose: &RobotConfiguration, cfg: &ControllerConfig) -> bool {
    pose.range < cfg.home_radius
}
