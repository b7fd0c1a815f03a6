//! Scenario orchestration, Monte-Carlo replication and trajectory logging.

pub mod log;
pub mod run;
pub mod scenario;
pub mod stats;

pub use log::{StepRecord, Termination, TrajectoryLog};
pub use run::{run_replicate, run_scenario};
pub use scenario::{Scenario, ScenarioConfig};
pub use stats::{aggregate_replicates, rmse, StateRmse, Summary};
