//! Experiment harness: configuration, closed-loop runs, metrics and exports.

pub mod compare;
pub mod config;
pub mod export;
pub mod metrics;
pub mod run;
pub mod series;
pub mod validate;

pub use compare::{
    compare_configs, sweep, ComparisonReport, ConfigAggregate, Reduction, RunRecord, SweepPoint, SweepReport,
};
pub use config::{ExperimentConfig, Scenario};
pub use export::{export_run, ExportPaths};
pub use metrics::{evaluate, pitch_rmse, pushing_stability, BumpReport, MetricsReport, Stability, SCHEMA_VERSION};
pub use run::{run_experiment, ContactEpisode, HornFailure, RunOutput};
pub use series::{read_sensor_csv, HornLog, LogRow, SensorRecord, TimeSeries};
pub use validate::{all_passed, validate_run, Check, CheckStatus};
