//! Scenario execution: configuration, inter-agent messages, the step loop,
//! metrics and file output.

pub mod channel;
pub mod cli;
pub mod config;
pub mod export;
pub mod sim;

pub use channel::{MessageChannel, NeighborMessage};
pub use config::{PerceptionMode, ScenarioConfig, Stage};
pub use export::{export_csv, PAIR_HEADER};
pub use sim::{
    run_scenario, run_scenario_with, ChainState, PairLogRow, PairMetrics, RunLog, RunMetrics, RunOptions, StepStatus,
};
