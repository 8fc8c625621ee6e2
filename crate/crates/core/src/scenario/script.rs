//! Scenario script schema, loading, overrides and validation.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::{MetricBounds, DEFAULT_STRESS_WINDOW};
use crate::partition::GlobalWorkspace;
use crate::patrol::PatrolParams;
use crate::topology::{OperatorId, RobotId, TeamTopology};
use crate::transition::{BoundaryMode, TransitionParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub mode: RunMode,
    pub duration_s: f64,
    pub topology: TopologySpec,
    pub workspace: GlobalWorkspace,
    #[serde(default)]
    pub initial_positions: InitialPositions,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Robots patrol their regions under the velocity model.
    #[default]
    FullSim,
    /// Robots stay at their initial positions; only the allocation evolves.
    AllocationOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Number of robots at t = 0, numbered 1..=robots.
    pub robots: usize,
    #[serde(default)]
    pub operators: OperatorAssignment,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorAssignment {
    /// No operators.
    #[default]
    Autonomous,
    /// Odd-indexed robots R_i have their own operator O_i.
    OddOperated,
    /// Every robot R_i has its own operator O_i.
    OneToOne,
    Explicit {
        operators: Vec<usize>,
        /// `[robot, operator]` pairs.
        edges: Vec<(usize, usize)>,
    },
}

impl TopologySpec {
    pub fn build(&self) -> Result<TeamTopology> {
        let m = self.robots;
        match &self.operators {
            OperatorAssignment::Autonomous => Ok(TeamTopology::autonomous(m)),
            OperatorAssignment::OddOperated => Ok(TeamTopology::odd_operated(m)),
            OperatorAssignment::OneToOne => TeamTopology::new(
                (1..=m).map(RobotId).collect(),
                (1..=m).map(OperatorId).collect(),
                (1..=m).map(|i| (RobotId(i), OperatorId(i))),
            ),
            OperatorAssignment::Explicit { operators, edges } => TeamTopology::new(
                (1..=m).map(RobotId).collect(),
                operators.iter().copied().map(OperatorId).collect(),
                edges.iter().map(|(r, o)| (RobotId(*r), OperatorId(*o))),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPositions {
    /// Same relative spot inside every robot's initial (uniform) strip;
    /// (0, 0) is the strip's bottom-left corner, (1, 1) its top-right.
    StripFraction {
        x: f64,
        y: f64,
    },
    Explicit(Vec<Point>),
}

impl Default for InitialPositions {
    fn default() -> Self {
        InitialPositions::StripFraction { x: 0.0, y: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceModel {
    /// Performance is 1 unless scripted otherwise.
    #[default]
    Unity,
    /// Cross-track error against the robot's own region perimeter.
    Crosstrack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Transition scaling constant K, 1/m.
    pub k: f64,
    /// Allocation cycle period τ, s.
    pub tau_s: f64,
    /// Lap-time threshold τ*, s.
    pub lap_threshold_s: f64,
    pub lap_band_s: f64,
    pub v_max: f64,
    /// Cross-track margin ψ, m.
    pub psi: f64,
    /// Stress moving-average window, samples.
    pub window: usize,
    pub sim_dt: f64,
    /// Convergence threshold on Σ|σ − σ′|.
    pub epsilon: f64,
    /// Consecutive cycles below `epsilon` that declare convergence.
    pub convergence_cycles: usize,
    pub boundary_mode: BoundaryMode,
    /// Apply the allocation; when false σ stays at the initial split.
    pub allocation: bool,
    pub performance_model: PerformanceModel,
    pub stop_on_convergence: bool,
    /// Keep every n-th cycle row in the record (the final cycle is always kept).
    pub record_every: usize,
    /// Keep a trajectory sample every n simulation steps; 0 disables.
    pub trajectory_every: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            k: 0.5,
            tau_s: 0.5,
            lap_threshold_s: 65.0,
            lap_band_s: 10.0,
            v_max: 0.8,
            psi: 0.5,
            window: DEFAULT_STRESS_WINDOW,
            sim_dt: 0.05,
            epsilon: 1e-3,
            convergence_cycles: 5,
            boundary_mode: BoundaryMode::FullPerimeter,
            allocation: true,
            performance_model: PerformanceModel::Unity,
            stop_on_convergence: false,
            record_every: 1,
            trajectory_every: 0,
        }
    }
}

impl ScenarioParams {
    pub fn transition(&self) -> Result<TransitionParams> {
        Ok(TransitionParams::new(self.k, self.tau_s)?.with_boundary_mode(self.boundary_mode))
    }

    pub fn patrol(&self) -> PatrolParams {
        PatrolParams {
            v_max: self.v_max,
            lap_threshold: self.lap_threshold_s,
            lap_band: self.lap_band_s,
            sim_dt: self.sim_dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    OperatorCondition,
    RobotCondition,
    Performance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Step {
        value: f64,
    },
    /// Linear change from the value in force at the event time.
    Ramp {
        value: f64,
        duration_s: f64,
    },
    /// `time_s,stress` CSV; times are relative to the event.
    StressTrace {
        path: String,
        #[serde(default)]
        window: Option<usize>,
    },
    /// `time_s,value` CSV with step-hold interpolation; times relative to
    /// the event, raw values normalized through `bounds`.
    ScriptedTrace {
        path: String,
        #[serde(default)]
        bounds: Option<MetricBounds>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptEvent {
    Condition {
        time_s: f64,
        /// Robot index for robot metrics, operator index for operator condition.
        target: usize,
        metric: MetricKind,
        profile: Profile,
        /// Provider cycle time; defaults to τ.
        #[serde(default)]
        cycle_time_s: Option<f64>,
    },
    AddRobot {
        time_s: f64,
        /// Defaults to one past the largest robot index.
        #[serde(default)]
        robot: Option<usize>,
        /// Defaults to the workspace center.
        #[serde(default)]
        position: Option<Point>,
        #[serde(default)]
        operators: Vec<usize>,
    },
    RemoveRobot {
        time_s: f64,
        robot: usize,
    },
    /// Adds an operator edge, creating the operator if needed.
    Connect {
        time_s: f64,
        robot: usize,
        operator: usize,
    },
    Disconnect {
        time_s: f64,
        robot: usize,
        operator: usize,
    },
}

impl ScriptEvent {
    pub fn time_s(&self) -> f64 {
        match self {
            ScriptEvent::Condition { time_s, .. }
            | ScriptEvent::AddRobot { time_s, .. }
            | ScriptEvent::RemoveRobot { time_s, .. }
            | ScriptEvent::Connect { time_s, .. }
            | ScriptEvent::Disconnect { time_s, .. } => *time_s,
        }
    }
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scripts always serialize")
    }

    /// Returns a copy with dotted `key=value` overrides applied, e.g.
    /// `params.k=10` or `topology.robots=50`. Values parse as JSON when
    /// possible and as strings otherwise. Keys must name existing fields.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item.split_once('=').ok_or_else(|| {
                Error::Validation(format!("override {item:?} is not of the form key=value"))
            })?;
            let slot = lookup_mut(&mut doc, key.trim())?;
            *slot = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        }
        serde_json::from_value(doc).map_err(|e| Error::Validation(format!("after overrides: {e}")))
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return fail(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            ));
        }
        if self.topology.robots == 0 {
            return fail("topology needs at least one robot".into());
        }
        let topology = self.topology.build().map_err(as_validation)?;
        self.workspace.validate().map_err(as_validation)?;

        let p = &self.params;
        let transition = p.transition().map_err(as_validation)?;
        p.patrol()
            .validate(transition.cycle_period)
            .map_err(as_validation)?;
        if self.mode == RunMode::FullSim {
            let steps = p.tau_s / p.sim_dt;
            if (steps - steps.round()).abs() > 1e-9 * steps {
                return fail(format!(
                    "tau_s ({}) must be a whole multiple of sim_dt ({})",
                    p.tau_s, p.sim_dt
                ));
            }
        }
        if p.window == 0 {
            return fail("params.window must be at least 1".into());
        }
        if !(p.psi > 0.0) {
            return fail(format!("params.psi must be positive, got {}", p.psi));
        }
        if !(p.epsilon > 0.0) || p.convergence_cycles == 0 {
            return fail("convergence needs epsilon > 0 and convergence_cycles >= 1".into());
        }
        if p.record_every == 0 {
            return fail("params.record_every must be at least 1".into());
        }

        match &self.initial_positions {
            InitialPositions::StripFraction { x, y } => {
                if !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y) {
                    return fail(format!(
                        "strip fractions must lie in [0, 1], got ({x}, {y})"
                    ));
                }
            }
            InitialPositions::Explicit(points) => {
                if points.len() != self.topology.robots {
                    return fail(format!(
                        "{} explicit positions for {} robots",
                        points.len(),
                        self.topology.robots
                    ));
                }
                let bounds = self.workspace.bounds();
                if let Some(p) = points.iter().find(|p| !bounds.contains(**p)) {
                    return fail(format!(
                        "initial position ({}, {}) is outside the workspace",
                        p.x, p.y
                    ));
                }
            }
        }

        self.validate_events(topology, transition.cycle_period)
    }

    fn validate_events(&self, topology: TeamTopology, tau: f64) -> Result<()> {
        let mut robots: BTreeSet<usize> = topology.robot_ids().iter().map(|r| r.0).collect();
        let mut operators: BTreeSet<usize> = topology.operator_ids().iter().map(|o| o.0).collect();
        let mut peak_robots = robots.len();
        let mut last_time = 0.0_f64;
        for (n, event) in self.events.iter().enumerate() {
            let t = event.time_s();
            let at = format!("event {} (t = {t} s)", n + 1);
            if !(t >= 0.0 && t <= self.duration_s) {
                return Err(Error::Validation(format!(
                    "{at} lies outside [0, {}]",
                    self.duration_s
                )));
            }
            if t < last_time {
                return Err(Error::Validation(format!(
                    "{at} is earlier than the event before it"
                )));
            }
            last_time = t;
            let robot_exists = |r: usize, robots: &BTreeSet<usize>| {
                if robots.contains(&r) {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "{at} targets robot R{r}, which does not exist"
                    )))
                }
            };
            match event {
                ScriptEvent::Condition {
                    target,
                    metric,
                    profile,
                    cycle_time_s,
                    ..
                } => {
                    match metric {
                        MetricKind::OperatorCondition => {
                            if !operators.contains(target) {
                                return Err(Error::Validation(format!(
                                    "{at} targets operator O{target}, which does not exist"
                                )));
                            }
                        }
                        MetricKind::RobotCondition | MetricKind::Performance => {
                            robot_exists(*target, &robots)?
                        }
                    }
                    validate_profile(profile, &at)?;
                    if let Some(c) = cycle_time_s {
                        if !(*c > 0.0) || *c > tau {
                            return Err(Error::Validation(format!(
                                "{at}: provider cycle time {c} s must be positive and at most tau ({tau} s)"
                            )));
                        }
                    }
                }
                ScriptEvent::AddRobot {
                    robot,
                    position,
                    operators: ops,
                    ..
                } => {
                    let id = robot.unwrap_or_else(|| robots.last().copied().unwrap_or(0) + 1);
                    if id == 0 || !robots.insert(id) {
                        return Err(Error::Validation(format!(
                            "{at} adds robot R{id}, which already exists"
                        )));
                    }
                    if let Some(o) = ops.iter().find(|o| !operators.contains(o)) {
                        return Err(Error::Validation(format!(
                            "{at} connects the new robot to operator O{o}, which does not exist"
                        )));
                    }
                    if let Some(p) = position {
                        if !self.workspace.bounds().contains(*p) {
                            return Err(Error::Validation(format!(
                                "{at} places a robot outside the workspace"
                            )));
                        }
                    }
                    peak_robots = peak_robots.max(robots.len());
                }
                ScriptEvent::RemoveRobot { robot, .. } => robot_exists(*robot, &robots)?,
                ScriptEvent::Connect {
                    robot, operator, ..
                } => {
                    robot_exists(*robot, &robots)?;
                    operators.insert(*operator);
                }
                ScriptEvent::Disconnect {
                    robot, operator, ..
                } => {
                    robot_exists(*robot, &robots)?;
                    if !operators.contains(operator) {
                        return Err(Error::Validation(format!(
                            "{at} targets operator O{operator}, which does not exist"
                        )));
                    }
                }
            }
        }
        self.workspace
            .check_fits(peak_robots)
            .map_err(as_validation)
    }
}

fn validate_profile(profile: &Profile, at: &str) -> Result<()> {
    let in_unit = |v: f64| (0.0..=1.0).contains(&v);
    match profile {
        Profile::Step { value } if !in_unit(*value) => Err(Error::Validation(format!(
            "{at}: value {value} is outside [0, 1]"
        ))),
        Profile::Ramp { value, duration_s } => {
            if !in_unit(*value) {
                Err(Error::Validation(format!(
                    "{at}: value {value} is outside [0, 1]"
                )))
            } else if !(*duration_s > 0.0) {
                Err(Error::Validation(format!(
                    "{at}: ramp duration must be positive"
                )))
            } else {
                Ok(())
            }
        }
        Profile::StressTrace {
            window: Some(0), ..
        } => Err(Error::Validation(format!(
            "{at}: stress window must be at least 1"
        ))),
        _ => Ok(()),
    }
}

fn as_validation(e: Error) -> Error {
    match e {
        Error::Validation(_) => e,
        other => Error::Validation(other.to_string()),
    }
}

fn lookup_mut<'a>(doc: &'a mut Value, key: &str) -> Result<&'a mut Value> {
    let mut node = doc;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| {
            Error::Validation(format!("override key {key:?} does not name a script field"))
        })?;
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn builtins_validate_and_round_trip() {
        for script in builtin::all() {
            script.validate().unwrap();
            let back = ScenarioScript::from_json(&script.to_json_pretty()).unwrap();
            assert_eq!(back, script);
        }
    }

    #[test]
    fn overrides_edit_nested_fields() {
        let s = builtin::s3();
        let o = s
            .with_overrides(&["params.k=10", "topology.robots=50", "name=big"])
            .unwrap();
        assert_eq!(o.params.k, 10.0);
        assert_eq!(o.topology.robots, 50);
        assert_eq!(o.name, "big");
        assert!(s.with_overrides(&["params.kk=1"]).is_err());
        assert!(s.with_overrides(&["params.k"]).is_err());
        assert!(s.with_overrides(&["params.k=fast"]).is_err());
    }

    #[test]
    fn event_targets_are_checked() {
        let mut s = builtin::s3();
        s.events.push(ScriptEvent::Condition {
            time_s: 1.0,
            target: 11,
            metric: MetricKind::RobotCondition,
            profile: Profile::Step { value: 0.5 },
            cycle_time_s: None,
        });
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("R11"), "{msg}");

        let mut s = builtin::s3();
        s.events.push(ScriptEvent::Condition {
            time_s: 1.0,
            target: 2,
            metric: MetricKind::OperatorCondition,
            profile: Profile::Step { value: 0.5 },
            cycle_time_s: None,
        });
        assert!(s.validate().unwrap_err().to_string().contains("O2"));
    }

    #[test]
    fn added_robots_become_valid_targets() {
        let mut s = builtin::s3();
        s.events = vec![
            ScriptEvent::AddRobot {
                time_s: 5.0,
                robot: None,
                position: None,
                operators: vec![],
            },
            ScriptEvent::Condition {
                time_s: 6.0,
                target: 11,
                metric: MetricKind::RobotCondition,
                profile: Profile::Step { value: 0.5 },
                cycle_time_s: None,
            },
        ];
        s.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values_and_times() {
        let mut s = builtin::s3();
        s.events[0] = ScriptEvent::Condition {
            time_s: 0.0,
            target: 3,
            metric: MetricKind::RobotCondition,
            profile: Profile::Step { value: 1.2 },
            cycle_time_s: None,
        };
        assert!(s.validate().is_err());
        let mut s = builtin::s3();
        s.events.push(ScriptEvent::RemoveRobot {
            time_s: s.duration_s + 1.0,
            robot: 1,
        });
        assert!(s.validate().is_err());
        let mut s = builtin::s1();
        s.params.sim_dt = 0.07;
        assert!(s.validate().is_err());
        let mut s = builtin::s1();
        s.schema_version = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut doc = serde_json::to_value(builtin::s3()).unwrap();
        doc["params"]["kay"] = Value::from(3);
        assert!(ScenarioScript::from_json(&doc.to_string()).is_err());
    }
}
