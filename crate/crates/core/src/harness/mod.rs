//! Scenario configuration, simulation runs, calibration and output.

pub mod calibrate;
pub mod config;
pub mod output;
pub mod scenario;
pub mod selftest;

pub use calibrate::{calibrate_preset, CalibrationOutcome, CalibrationTarget, SearchSpace};
pub use config::ScenarioConfig;
pub use output::{write_run, OutputOptions};
pub use scenario::{run_many, run_scenario, sweep, sweep_values, RunArtifacts, SweepPoint};
pub use selftest::run_selftest;
