use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomingError {
    #[error("robot too close to home for the polar model (R = {range} cm)")]
    NearHomeSingularity { range: f64 },

    #[error("degenerate landmark geometry for landmark {landmark} (denominator {denominator:e})")]
    DegenerateGeometry { landmark: usize, denominator: f64 },

    #[error("invalid visibility policy: {0}")]
    InvalidPolicy(String),

    #[error("innovation covariance is numerically singular (condition number {condition:e})")]
    IllConditionedInnovation { condition: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = HomingError> = std::result::Result<T, E>;
