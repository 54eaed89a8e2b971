//! Scenario loading, experiment orchestration and report emission.

pub mod experiment;
pub mod report;
pub mod scenario;

pub use experiment::{
    run_experiment, ComparisonReport, ExperimentOutcome, Strategy, StrategySummary,
};
pub use report::{emit_reports, fmt_sig6};
pub use scenario::{load_scenario, load_scenario_file, Mode, ProfileRef, ScenarioConfig};
