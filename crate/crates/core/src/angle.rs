//! Angle helpers. Every angle in the crate lives in (-π, π].

use std::f64::consts::{PI, TAU};

/// Wraps an angle into (-π, π].
#[inline]
pub fn wrap(x: f64) -> f64 {
    if x > -PI && x <= PI {
        x
    } else {
        PI - (PI - x).rem_euclid(TAU)
    }
}

/// Signed shortest difference `a - b`, wrapped into (-π, π].
#[inline]
pub fn diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}
