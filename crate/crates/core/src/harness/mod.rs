//! Scenario construction, congestion injection, replicated runs, metrics
//! and CSV output.

mod config;
mod metrics;
pub mod output;
mod population;
mod run;

pub use config::{
    check_comparable, InjectionConfig, LaneReversalConfig, NetworkConfig, ScenarioConfig, Selector, Strategy,
    SCENARIO_FORMAT_VERSION,
};
pub use metrics::{aggregate, mean, median, std_dev, Aggregate, RunMetrics};
pub use population::{generate_population, population_digest, trip};
pub use run::{
    compare, compare_configs, run, sweep, CompareRow, Comparison, EdgeRow, Injection, Report, RunOptions, RunOutput,
    Scenario, SweepPoint,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) | HarnessError::Io(_) => 2,
        }
    }
}
