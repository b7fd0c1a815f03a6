//! Bearing-only visual homing of a unicycle robot.
//!
//! The robot state is kept in polar coordinates around the home position and
//! augmented with the bearings of `q` landmarks. Three recursive estimators
//! share one prediction/update skeleton: a multi-rate EKF, an augmented-state
//! EKF that also estimates selected home bearings, and a proportional-integral
//! EKF that adds an innovation-driven bias term to the prediction.

pub mod angle;
pub mod cli;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod filters;
pub mod harness;
pub mod measurement;
pub(crate) mod numdiff;
pub mod observability;

pub use dynamics::{AugmentedState, ControlInput, LandmarkSet, RobotConfiguration};
pub use error::{HomingError, Result};
