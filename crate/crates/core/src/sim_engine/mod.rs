//! Fixed-step simulation loop, scenario files, experiments and metrics.

mod engine;
mod experiment;
mod export;
mod metrics;
mod scenario;
mod seeds;

pub use engine::{run_trial, NEAR_ZONE_RADIUS};
pub use experiment::{
    run_experiment, run_experiment_parallel, write_summary_csv, write_trials_csv, ExperimentSummary, VehicleSummary,
};
pub use export::{export_traces, fmt3, write_traces, TRACE_COLUMNS};
pub use metrics::{passing_time, ChannelSummary, ControlEvent, TraceSample, TrialMetrics, VehicleMetrics};
pub use scenario::{ConfigError, ScenarioConfig, ScenarioMode, VehicleSpec};
pub use seeds::{mix_seed, trial_seed};
