//! Bundled scenarios.
//!
//! S1 and S2 are three-robot patrols (R1 and R2 teleoperated, R3
//! autonomous). S3 and S4 are ten stationary robots with odd-indexed robots
//! teleoperated. Event times in S1/S2 are estimates, not reference values;
//! they are ordinary script fields and can be overridden.

use crate::geometry::Point;
use crate::partition::GlobalWorkspace;

use super::script::{
    InitialPositions, MetricKind, OperatorAssignment, Profile, RunMode, ScenarioParams,
    ScenarioScript, ScriptEvent, TopologySpec, SCHEMA_VERSION,
};

/// S1 event times (s): operator O1 collapses, R3 degrades, O1 dips then recovers.
pub const S1_EVENT_TIMES: [f64; 3] = [260.0, 400.0, 530.0];
/// S2 failure time (s) of R3.
pub const S2_FAILURE_TIME: f64 = 260.0;

pub fn names() -> [&'static str; 4] {
    ["s1", "s2", "s3", "s4"]
}

pub fn by_name(name: &str) -> Option<ScenarioScript> {
    match name.to_ascii_lowercase().as_str() {
        "s1" => Some(s1()),
        "s2" => Some(s2()),
        "s3" => Some(s3()),
        "s4" => Some(s4()),
        _ => None,
    }
}

pub fn all() -> Vec<ScenarioScript> {
    vec![s1(), s2(), s3(), s4()]
}

fn step(time_s: f64, target: usize, metric: MetricKind, value: f64) -> ScriptEvent {
    ScriptEvent::Condition {
        time_s,
        target,
        metric,
        profile: Profile::Step { value },
        cycle_time_s: None,
    }
}

fn patrol_team() -> TopologySpec {
    TopologySpec {
        robots: 3,
        operators: OperatorAssignment::Explicit {
            operators: vec![1, 2],
            edges: vec![(1, 1), (2, 2)],
        },
    }
}

fn patrol_workspace() -> GlobalWorkspace {
    GlobalWorkspace {
        origin: Point::new(0.0, 0.0),
        width: 15.0,
        height: 12.0,
        safety_gap: 0.5,
    }
}

/// Three-event deterioration with and without recovery.
pub fn s1() -> ScenarioScript {
    let [t1, t2, t3] = S1_EVENT_TIMES;
    ScenarioScript {
        schema_version: SCHEMA_VERSION,
        name: "s1".into(),
        mode: RunMode::FullSim,
        duration_s: 750.0,
        topology: patrol_team(),
        workspace: patrol_workspace(),
        initial_positions: InitialPositions::StripFraction { x: 0.0, y: 0.0 },
        params: ScenarioParams::default(),
        events: vec![
            step(t1, 1, MetricKind::OperatorCondition, 0.5),
            step(t2, 3, MetricKind::RobotCondition, 0.7),
            step(t3, 1, MetricKind::OperatorCondition, 0.4),
            ScriptEvent::Condition {
                time_s: t3 + 10.0,
                target: 1,
                metric: MetricKind::OperatorCondition,
                profile: Profile::Ramp {
                    value: 1.0,
                    duration_s: 90.0,
                },
                cycle_time_s: None,
            },
        ],
    }
}

/// Total failure of the autonomous robot R3.
pub fn s2() -> ScenarioScript {
    ScenarioScript {
        name: "s2".into(),
        duration_s: 600.0,
        events: vec![step(S2_FAILURE_TIME, 3, MetricKind::RobotCondition, 0.0)],
        ..s1()
    }
}

fn stationary(name: &str, r3_condition: f64, fraction_x: f64, duration_s: f64) -> ScenarioScript {
    ScenarioScript {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        mode: RunMode::AllocationOnly,
        duration_s,
        topology: TopologySpec {
            robots: 10,
            operators: OperatorAssignment::OddOperated,
        },
        workspace: GlobalWorkspace {
            origin: Point::new(0.0, 0.0),
            width: 20.0,
            height: 4.0,
            safety_gap: 0.0,
        },
        initial_positions: InitialPositions::StripFraction {
            x: fraction_x,
            y: 0.5,
        },
        params: ScenarioParams {
            k: 5.0,
            ..ScenarioParams::default()
        },
        events: vec![
            step(0.0, 3, MetricKind::OperatorCondition, 0.8),
            step(0.0, 3, MetricKind::RobotCondition, r3_condition),
            step(0.0, 5, MetricKind::OperatorCondition, 0.8),
            step(0.0, 8, MetricKind::RobotCondition, 0.75),
        ],
    }
}

/// Deteriorated agents, robots at their strip centers.
pub fn s3() -> ScenarioScript {
    stationary("s3", 0.6, 0.5, 2000.0)
}

/// R3 failed, robots near the left edge of their strips.
pub fn s4() -> ScenarioScript {
    stationary("s4", 0.0, 0.25, 300.0)
}
