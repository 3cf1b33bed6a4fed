//! Deterministic scenario simulator: scripted obstacles, the rollout loop
//! with the shielded and baseline executors, metrics and traces.

mod obstacles;
mod rollout;
mod scenario;
mod suite;
mod trace;

pub use obstacles::ObstacleWorld;
pub use rollout::{ground_truth_check, run_rollout, Metrics, DEVIATION_HISTORY};
pub use scenario::{FilterKind, ObstacleScript, Pattern, RobotRef, ScenarioConfig, SourceSpec, Task, Timing};
pub use suite::{run_suite, run_suite_with, Aggregate, MetricStats, RolloutReport, SuiteReport};
pub use trace::{
    read_trace, trace_to_string, write_trace, ChunkEvent, Mode, RolloutTrace, Termination, TickRecord, TraceHeader,
    TRACE_FORMAT,
};
