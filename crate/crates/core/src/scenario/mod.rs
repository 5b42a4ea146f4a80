//! Scenarios, the run loop, run logs and safety metrics.

mod compare;
mod config;
mod fixtures;
mod human;
mod log;
mod metrics;
mod run;

pub use compare::{compare_reports, compare_runs, Comparison, ComparisonRow, MetricDelta};
pub use config::{AnatomySource, InputSource, Rates, RobotConfig, Scenario, SensorConfig};
pub use fixtures::{table2_fixture, TABLE2_WITH, TABLE2_WITHOUT};
pub use human::{
    check_reachable, generate_trajectory, max_static_force, HandCommand, HandForceTrajectory, HandInput,
    HandObservation, HumanParams, Segment, TremorParams, TREMOR_STREAM,
};
pub use log::{LogEvent, LogHeader, LogRecord, RunLog, LOG_MAGIC, LOG_VERSION};
pub use metrics::{compute_metrics, Attribution, MetricsReport, StructureMetrics};
pub use run::{replay_log, run_batch, run_seeded, run_simulation, ReplayInput, SimSnapshot, Simulation};
