//! Fixed-step scenario execution.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use crate::allocation::{propose_allocation, ConditionSnapshot, WorkloadVector};
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::metrics::{
    crosstrack_performance, ConditionProvider, MetricBounds, ProviderKind, ScriptedTrace,
    StressTrace,
};
use crate::partition::{partition_from_workload, GlobalWorkspace};
use crate::patrol::{
    ability, commanded_velocity, required_velocity, system_patrol_time, LapStatus, PatrolParams,
    RobotKinematicState,
};
use crate::topology::{OperatorId, RobotId, TeamTopology};
use crate::transition::{allocation_cycle, TransitionParams};

use super::record::{CycleRow, LapRow, PatrolLap, RunRecord, RunSummary, TrajectoryRow};
use super::script::{
    InitialPositions, MetricKind, PerformanceModel, Profile, RunMode, ScenarioScript, ScriptEvent,
};

/// A change to the team while a run is in progress.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyEdit {
    /// The new robot starts with zero workload and transitions in.
    AddRobot {
        robot: RobotId,
        position: Point,
        operators: Vec<OperatorId>,
    },
    /// The robot is treated as failed from now on.
    RemoveRobot(RobotId),
    Connect(RobotId, OperatorId),
    /// A robot left without any operator counts as failed until reconnected.
    Disconnect(RobotId, OperatorId),
}

#[derive(Debug, Clone)]
enum Segment {
    Step(f64),
    Ramp { to: f64, duration: f64 },
    Provider(ConditionProvider),
}

/// Scripted value of one agent metric over time. 1.0 before any event.
#[derive(Debug, Clone, Default)]
struct MetricTimeline {
    // (start time, value in force just before start, segment)
    segments: Vec<(f64, f64, Segment)>,
}

impl MetricTimeline {
    fn push(&mut self, start: f64, segment: Segment) -> Result<()> {
        let before = self.value_at(start)?;
        self.segments.push((start, before, segment));
        Ok(())
    }

    fn value_at(&self, t: f64) -> Result<f64> {
        let n = self.segments.partition_point(|(start, _, _)| *start <= t);
        let Some((start, before, segment)) = n.checked_sub(1).map(|i| &self.segments[i]) else {
            return Ok(1.0);
        };
        Ok(match segment {
            Segment::Step(v) => *v,
            Segment::Ramp { to, duration } => {
                let f = ((t - start) / duration).clamp(0.0, 1.0);
                before + (to - before) * f
            }
            Segment::Provider(p) => p.sample(t - start, None)?.unwrap_or(*before),
        })
    }
}

/// A validated script with its trace files loaded.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    script: ScenarioScript,
    timelines: BTreeMap<(MetricKind, usize), MetricTimeline>,
    edits: Vec<(f64, TopologyEdit)>,
}

impl PreparedScenario {
    /// Validates `script` and loads any trace files, resolving relative
    /// paths against `base_dir`.
    pub fn new(script: &ScenarioScript, base_dir: Option<&Path>) -> Result<Self> {
        script.validate()?;
        let tau = script.params.tau_s;
        let transition = script.params.transition()?;
        let mut timelines: BTreeMap<(MetricKind, usize), MetricTimeline> = BTreeMap::new();
        let mut edits = Vec::new();
        let mut provider_cycles = Vec::new();
        let mut next_robot = script.topology.robots;
        let resolve = |p: &str| -> PathBuf {
            let path = PathBuf::from(p);
            match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            }
        };

        for event in &script.events {
            match event {
                ScriptEvent::Condition {
                    time_s,
                    target,
                    metric,
                    profile,
                    cycle_time_s,
                } => {
                    let cycle = cycle_time_s.unwrap_or(tau);
                    provider_cycles.push(cycle);
                    let label = format!("{metric:?} of agent {target}");
                    let segment = match profile {
                        Profile::Step { value } => Segment::Step(*value),
                        Profile::Ramp { value, duration_s } => Segment::Ramp {
                            to: *value,
                            duration: *duration_s,
                        },
                        Profile::StressTrace { path, window } => {
                            let trace = StressTrace::from_csv_path(&resolve(path))?;
                            Segment::Provider(ConditionProvider::new(
                                label,
                                ProviderKind::HumanStress {
                                    trace,
                                    window: window.unwrap_or(script.params.window),
                                },
                                cycle,
                                MetricBounds::unit(),
                            )?)
                        }
                        Profile::ScriptedTrace { path, bounds } => {
                            let trace = ScriptedTrace::from_csv_path(&resolve(path))?;
                            let kind = match metric {
                                MetricKind::RobotCondition => {
                                    ProviderKind::RobotHealthTrace { trace }
                                }
                                _ => ProviderKind::Scripted { trace },
                            };
                            Segment::Provider(ConditionProvider::new(
                                label,
                                kind,
                                cycle,
                                bounds.unwrap_or_default(),
                            )?)
                        }
                    };
                    timelines
                        .entry((*metric, *target))
                        .or_default()
                        .push(*time_s, segment)?;
                }
                ScriptEvent::AddRobot {
                    time_s,
                    robot,
                    position,
                    operators,
                } => {
                    let id = robot.unwrap_or(next_robot + 1);
                    next_robot = next_robot.max(id);
                    edits.push((
                        *time_s,
                        TopologyEdit::AddRobot {
                            robot: RobotId(id),
                            position: position
                                .unwrap_or_else(|| script.workspace.bounds().center()),
                            operators: operators.iter().copied().map(OperatorId).collect(),
                        },
                    ));
                }
                ScriptEvent::RemoveRobot { time_s, robot } => {
                    edits.push((*time_s, TopologyEdit::RemoveRobot(RobotId(*robot))))
                }
                ScriptEvent::Connect {
                    time_s,
                    robot,
                    operator,
                } => edits.push((
                    *time_s,
                    TopologyEdit::Connect(RobotId(*robot), OperatorId(*operator)),
                )),
                ScriptEvent::Disconnect {
                    time_s,
                    robot,
                    operator,
                } => edits.push((
                    *time_s,
                    TopologyEdit::Disconnect(RobotId(*robot), OperatorId(*operator)),
                )),
            }
        }
        transition.check_provider_cycles(&provider_cycles)?;
        Ok(PreparedScenario {
            script: script.clone(),
            timelines,
            edits,
        })
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }
}

/// Runs a script whose trace paths (if any) are absolute or relative to the
/// working directory.
pub fn run_scenario(script: &ScenarioScript) -> Result<RunRecord> {
    run_scenario_in(script, None)
}

pub fn run_scenario_in(script: &ScenarioScript, base_dir: Option<&Path>) -> Result<RunRecord> {
    let prepared = PreparedScenario::new(script, base_dir)?;
    let mut runner = ScenarioRunner::new(&prepared)?;
    runner.run_to_end()?;
    Ok(runner.finish())
}

/// Step-by-step execution of a prepared scenario.
pub struct ScenarioRunner {
    name: String,
    mode: RunMode,
    workspace: GlobalWorkspace,
    transition: TransitionParams,
    patrol: PatrolParams,
    allocation_enabled: bool,
    performance_model: PerformanceModel,
    psi: f64,
    epsilon: f64,
    convergence_cycles: usize,
    stop_on_convergence: bool,
    record_every: u64,
    trajectory_every: u64,
    total_cycles: u64,
    steps_per_cycle: u64,

    timelines: BTreeMap<(MetricKind, usize), MetricTimeline>,
    pending: VecDeque<(f64, TopologyEdit)>,

    topology: TeamTopology,
    removed: BTreeSet<RobotId>,
    disconnected: BTreeSet<RobotId>,
    sigma: WorkloadVector,
    robots: Vec<RobotKinematicState>,
    regions: Vec<Rect>,
    kappa: Vec<f64>,
    velocity: Vec<f64>,
    paths: Vec<Vec<Point>>,
    cycle: u64,
    step_count: u64,

    rows: Vec<CycleRow>,
    last_row: Option<CycleRow>,
    error_series: Vec<(f64, f64)>,
    trajectory: Vec<TrajectoryRow>,
    streak: usize,
    convergence_time: Option<f64>,
    last_proposed: Option<Vec<f64>>,
    no_capable: u64,
    max_sum_deviation: f64,
}

impl ScenarioRunner {
    pub fn new(prepared: &PreparedScenario) -> Result<Self> {
        let script = &prepared.script;
        let p = &script.params;
        let topology = script.topology.build()?;
        let m = topology.robot_count();
        let sigma = WorkloadVector::uniform(m);
        let initial = partition_from_workload(&script.workspace, &sigma)?;
        let positions: Vec<Point> = match &script.initial_positions {
            InitialPositions::StripFraction { x, y } => initial
                .regions
                .iter()
                .map(|r| Point::new(r.min.x + x * r.width(), r.min.y + y * r.height()))
                .collect(),
            InitialPositions::Explicit(points) => points.clone(),
        };
        let mut runner = ScenarioRunner {
            name: script.name.clone(),
            mode: script.mode,
            workspace: script.workspace,
            transition: p.transition()?,
            patrol: p.patrol(),
            allocation_enabled: p.allocation,
            performance_model: p.performance_model,
            psi: p.psi,
            epsilon: p.epsilon,
            convergence_cycles: p.convergence_cycles,
            stop_on_convergence: p.stop_on_convergence,
            record_every: p.record_every as u64,
            trajectory_every: p.trajectory_every as u64,
            total_cycles: (script.duration_s / p.tau_s + 1e-9).floor() as u64,
            steps_per_cycle: (p.tau_s / p.sim_dt).round().max(1.0) as u64,
            timelines: prepared.timelines.clone(),
            pending: prepared.edits.iter().cloned().collect(),
            topology,
            removed: BTreeSet::new(),
            disconnected: BTreeSet::new(),
            sigma,
            robots: positions
                .iter()
                .map(|p| RobotKinematicState::new(*p))
                .collect(),
            regions: initial.regions,
            kappa: vec![1.0; m],
            velocity: vec![0.0; m],
            paths: vec![Vec::new(); m],
            cycle: 0,
            step_count: 0,
            rows: Vec::new(),
            last_row: None,
            error_series: Vec::new(),
            trajectory: Vec::new(),
            streak: 0,
            convergence_time: None,
            last_proposed: None,
            no_capable: 0,
            max_sum_deviation: 0.0,
        };
        runner.max_sum_deviation = (runner.sigma.total() - 1.0).abs();
        Ok(runner)
    }

    /// Time of the next cycle.
    pub fn time(&self) -> f64 {
        self.cycle as f64 * self.transition.cycle_period
    }

    pub fn topology(&self) -> &TeamTopology {
        &self.topology
    }

    pub fn sigma(&self) -> &WorkloadVector {
        &self.sigma
    }

    pub fn positions(&self) -> Vec<Point> {
        self.robots.iter().map(|r| r.position).collect()
    }

    pub fn is_finished(&self) -> bool {
        self.cycle > self.total_cycles
            || (self.stop_on_convergence && self.convergence_time.is_some())
    }

    pub fn is_converged(&self) -> bool {
        self.convergence_time.is_some()
    }

    /// Robots currently treated as failed (removed or left without operators).
    pub fn failed_robots(&self) -> BTreeSet<RobotId> {
        self.removed.union(&self.disconnected).copied().collect()
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.run_cycle()?;
        }
        Ok(())
    }

    /// Applies a team change immediately; it takes effect at the next cycle.
    pub fn apply_edit(&mut self, edit: TopologyEdit) -> Result<()> {
        match edit {
            TopologyEdit::AddRobot {
                robot,
                position,
                operators,
            } => {
                self.topology.add_robot(robot)?;
                for operator in operators {
                    if !self.topology.has_operator(operator) {
                        self.topology.add_operator(operator)?;
                    }
                    self.topology.connect(robot, operator)?;
                }
                self.workspace.check_fits(self.topology.robot_count())?;
                self.sigma.shares.push(0.0);
                self.robots.push(RobotKinematicState::new(position));
                self.regions.push(Rect::empty_at(position));
                self.kappa.push(1.0);
                self.velocity.push(0.0);
                self.paths.push(Vec::new());
            }
            TopologyEdit::RemoveRobot(robot) => {
                self.require_robot(robot)?;
                self.removed.insert(robot);
            }
            TopologyEdit::Connect(robot, operator) => {
                self.require_robot(robot)?;
                if !self.topology.has_operator(operator) {
                    self.topology.add_operator(operator)?;
                }
                self.topology.connect(robot, operator)?;
                self.disconnected.remove(&robot);
            }
            TopologyEdit::Disconnect(robot, operator) => {
                self.require_robot(robot)?;
                let had_operators = !self.topology.operators_of(robot).unwrap_or(&[]).is_empty();
                self.topology.disconnect(robot, operator);
                if had_operators && self.topology.operators_of(robot).unwrap_or(&[]).is_empty() {
                    self.disconnected.insert(robot);
                }
            }
        }
        Ok(())
    }

    fn require_robot(&self, robot: RobotId) -> Result<()> {
        if self.topology.has_robot(robot) {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown robot {robot}")))
        }
    }

    /// Samples every provider at time `t`. Failed robots report zero health.
    fn snapshot(&self, t: f64) -> Result<ConditionSnapshot> {
        let value = |metric: MetricKind, id: usize| -> Result<f64> {
            self.timelines
                .get(&(metric, id))
                .map_or(Ok(1.0), |tl| tl.value_at(t))
        };
        let failed = self.failed_robots();
        let mut snap = ConditionSnapshot {
            timestamp: self.cycle,
            ..ConditionSnapshot::default()
        };
        for (i, robot) in self.topology.robot_ids().iter().enumerate() {
            let condition = if failed.contains(robot) {
                0.0
            } else {
                value(MetricKind::RobotCondition, robot.0)?
            };
            let mut performance = value(MetricKind::Performance, robot.0)?;
            if self.performance_model == PerformanceModel::Crosstrack
                && !self.paths[i].is_empty()
                && !self.regions[i].is_empty()
            {
                performance = performance.min(crosstrack_performance(
                    &self.paths[i],
                    &self.regions[i],
                    self.psi,
                )?);
            }
            snap.robot_condition.insert(*robot, condition);
            snap.robot_performance.insert(*robot, performance);
        }
        for operator in self.topology.operator_ids() {
            snap.operator_condition
                .insert(*operator, value(MetricKind::OperatorCondition, operator.0)?);
        }
        Ok(snap)
    }

    /// Runs one allocation cycle and, in full simulation, the robot motion
    /// up to the next cycle.
    pub fn run_cycle(&mut self) -> Result<()> {
        let t = self.time();
        while self.pending.front().is_some_and(|(at, _)| *at <= t) {
            let (_, edit) = self.pending.pop_front().expect("checked");
            self.apply_edit(edit)?;
        }

        let snapshot = self.snapshot(t)?;
        let failed: BTreeSet<usize> = self
            .failed_robots()
            .iter()
            .filter_map(|r| self.topology.robot_index(*r))
            .collect();
        let positions = self.positions();
        let current = self.sigma.clone();

        let (proposed, q_f, k_e) = if self.allocation_enabled {
            match allocation_cycle(
                &self.topology,
                &snapshot,
                &positions,
                &current,
                &self.transition,
                &self.workspace,
                &failed,
            ) {
                Ok(out) => {
                    self.sigma = out.state.sigma;
                    (
                        Some(out.state.sigma_proposed.shares),
                        Some(out.state.q_f),
                        Some(out.state.k_e),
                    )
                }
                Err(Error::NoCapableAgent) => {
                    log::warn!(
                        "{}: no capable agent at t = {t} s; workload frozen",
                        self.name
                    );
                    self.no_capable += 1;
                    (None, None, None)
                }
                Err(e) => return Err(e),
            }
        } else {
            match propose_allocation(&self.topology, &snapshot) {
                Ok(p) => (Some(p.shares), None, None),
                Err(Error::NoCapableAgent) => {
                    self.no_capable += 1;
                    (None, None, None)
                }
                Err(e) => return Err(e),
            }
        };
        self.sigma.timestamp = self.cycle + 1;
        self.max_sum_deviation = self.max_sum_deviation.max((self.sigma.total() - 1.0).abs());

        let error = proposed
            .as_ref()
            .map(|p| current.l1_distance(&WorkloadVector::new(p.clone(), self.cycle)));
        self.track_convergence(error);
        if let Some(e) = error {
            self.error_series.push((t, e));
        }

        self.regions = partition_from_workload(&self.workspace, &self.sigma)?.regions;
        for i in 0..self.topology.robot_count() {
            self.kappa[i] = ability(&snapshot, &self.topology, i)?;
            self.velocity[i] = match self.mode {
                RunMode::FullSim => commanded_velocity(
                    self.kappa[i] * self.patrol.v_max,
                    required_velocity(
                        &self.regions[i],
                        self.patrol.lap_threshold,
                        self.patrol.v_max,
                    ),
                ),
                RunMode::AllocationOnly => 0.0,
            };
        }

        let row = CycleRow {
            cycle: self.cycle,
            time_s: t,
            robots: self.topology.robot_ids().to_vec(),
            sigma: current.shares,
            sigma_proposed: proposed.clone(),
            q_f,
            k_e,
            kappa: self.kappa.clone(),
            velocity: self.velocity.clone(),
            transition_error: error,
        };
        if self.cycle.is_multiple_of(self.record_every) {
            self.rows.push(row);
            self.last_row = None;
        } else {
            self.last_row = Some(row);
        }
        if proposed.is_some() {
            self.last_proposed = proposed;
        }

        self.cycle += 1;
        if self.mode == RunMode::FullSim && !self.is_finished() {
            self.advance_robots();
        }
        Ok(())
    }

    fn track_convergence(&mut self, error: Option<f64>) {
        match error {
            Some(e) if e < self.epsilon => {
                self.streak += 1;
                if self.streak == self.convergence_cycles && self.convergence_time.is_none() {
                    let first = self.cycle + 1 - self.convergence_cycles as u64;
                    self.convergence_time = Some(first as f64 * self.transition.cycle_period);
                }
            }
            _ => {
                self.streak = 0;
                self.convergence_time = None;
            }
        }
    }

    fn advance_robots(&mut self) {
        let dt = self.patrol.sim_dt;
        for path in &mut self.paths {
            path.clear();
        }
        for _ in 0..self.steps_per_cycle {
            for (i, robot) in self.robots.iter_mut().enumerate() {
                robot.advance(&self.regions[i], self.velocity[i], dt);
                if self.performance_model == PerformanceModel::Crosstrack {
                    self.paths[i].push(robot.position);
                }
            }
            self.step_count += 1;
            if self.trajectory_every > 0 && self.step_count.is_multiple_of(self.trajectory_every) {
                let time_s = self.step_count as f64 * dt;
                for (i, robot) in self.robots.iter().enumerate() {
                    self.trajectory.push(TrajectoryRow {
                        time_s,
                        robot: self.topology.robot_ids()[i],
                        x: robot.position.x,
                        y: robot.position.y,
                        v: self.velocity[i],
                    });
                }
            }
        }
    }

    pub fn finish(mut self) -> RunRecord {
        if let Some(row) = self.last_row.take() {
            self.rows.push(row);
        }
        let ids = self.topology.robot_ids().to_vec();
        let mut laps = Vec::new();
        for (robot, state) in ids.iter().zip(&self.robots) {
            for (n, lap) in state.laps.iter().enumerate() {
                laps.push(LapRow {
                    robot: *robot,
                    lap: n + 1,
                    lap_time_s: lap.duration,
                    completed_at_s: lap.completed_at,
                    transitional: lap.transitional,
                });
            }
        }

        let failed = self.failed_robots();
        let lap_times: Vec<Vec<f64>> = self.robots.iter().map(|r| r.lap_times()).collect();
        let holds_region: Vec<bool> = ids
            .iter()
            .zip(&self.regions)
            .map(|(id, r)| !r.is_empty() && !failed.contains(id))
            .collect();
        let most = lap_times.iter().map(Vec::len).max().unwrap_or(0);
        let patrol_laps: Vec<PatrolLap> = (0..most)
            .map(|k| {
                let active: Vec<bool> = lap_times
                    .iter()
                    .zip(&holds_region)
                    .map(|(times, holds)| times.len() > k || *holds)
                    .collect();
                let t_l_s = match system_patrol_time(k, &lap_times, &active) {
                    LapStatus::Complete(t) => Some(t),
                    LapStatus::Pending => None,
                };
                PatrolLap { lap: k + 1, t_l_s }
            })
            .collect();
        let max_t_l_s = patrol_laps
            .iter()
            .filter_map(|l| l.t_l_s)
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |a| a.max(t)))
            });

        let summary = RunSummary {
            name: self.name.clone(),
            cycles_run: self.cycle,
            robots: ids,
            initial_error: self.error_series.first().map(|(_, e)| *e),
            final_error: self.error_series.last().map(|(_, e)| *e),
            convergence_time_s: self.convergence_time,
            final_sigma: self.sigma.shares.clone(),
            final_sigma_proposed: self.last_proposed.clone(),
            patrol_laps,
            max_t_l_s,
            no_capable_agent_cycles: self.no_capable,
            max_sum_deviation: self.max_sum_deviation,
        };
        RunRecord {
            cycles: self.rows,
            error_series: self.error_series,
            laps,
            trajectory: self.trajectory,
            workspace: self.workspace,
            summary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn timeline_steps_and_ramps() {
        let mut tl = MetricTimeline::default();
        assert_eq!(tl.value_at(5.0).unwrap(), 1.0);
        tl.push(10.0, Segment::Step(0.4)).unwrap();
        tl.push(
            20.0,
            Segment::Ramp {
                to: 1.0,
                duration: 10.0,
            },
        )
        .unwrap();
        assert_eq!(tl.value_at(9.9).unwrap(), 1.0);
        assert_eq!(tl.value_at(10.0).unwrap(), 0.4);
        assert!((tl.value_at(25.0).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(tl.value_at(40.0).unwrap(), 1.0);
    }

    #[test]
    fn cycle_count_covers_duration() {
        let mut s = builtin::s4();
        s.duration_s = 3.0;
        let rec = run_scenario(&s).unwrap();
        assert_eq!(rec.summary.cycles_run, 7);
        assert_eq!(rec.cycles.last().unwrap().time_s, 3.0);
    }

    #[test]
    fn stop_on_convergence_ends_early() {
        let mut s = builtin::s3();
        s.params.stop_on_convergence = true;
        let rec = run_scenario(&s).unwrap();
        assert!(rec.summary.cycles_run < 20);
        assert!(rec.summary.convergence_time_s.is_some());
    }

    #[test]
    fn incapable_team_freezes_workload() {
        let mut s = builtin::s4();
        s.duration_s = 5.0;
        s.topology.operators = crate::scenario::OperatorAssignment::Autonomous;
        s.events = (1..=10)
            .map(|r| ScriptEvent::Condition {
                time_s: 1.0,
                target: r,
                metric: MetricKind::RobotCondition,
                profile: Profile::Step { value: 0.0 },
                cycle_time_s: None,
            })
            .collect();
        let rec = run_scenario(&s).unwrap();
        assert_eq!(rec.summary.no_capable_agent_cycles, 9);
        assert!((rec.summary.final_sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
