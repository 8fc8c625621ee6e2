//! Scripted scenarios: schema, execution, recording and sweeps.

pub mod builtin;
pub mod engine;
pub mod record;
pub mod script;
pub mod sweep;

pub use engine::{run_scenario, run_scenario_in, PreparedScenario, ScenarioRunner, TopologyEdit};
pub use record::{CycleRow, LapRow, PatrolLap, RunRecord, RunSummary, TrajectoryRow};
pub use script::{
    InitialPositions, MetricKind, OperatorAssignment, PerformanceModel, Profile, RunMode,
    ScenarioParams, ScenarioScript, ScriptEvent, TopologySpec, SCHEMA_VERSION,
};
pub use sweep::{sweep, sweep_parallel, SweepAxis, SweepPoint, SweepResult};
