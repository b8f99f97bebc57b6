//! Scenario generation, metrics, suite runner and plotting for the airgrasp
//! simulator.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod scenario;
pub mod suite;

pub use config::Config;
pub use metrics::{compute_metrics, MetricsReport};
pub use scenario::{build_scenario, Scenario, ScenarioName, ScenarioSpec};
pub use suite::{run_cells, run_suite, RunOptions, SuiteOutput};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Core(#[from] airgrasp_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Core(airgrasp_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
