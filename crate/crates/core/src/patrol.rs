//! Kinematic boundary-following patrol simulation.
//!
//! Robots are points that travel counterclockwise along the perimeter of
//! their allocated rectangle. When the rectangle changes they first head in a
//! straight line to the nearest point of the new perimeter.

use serde::{Deserialize, Serialize};

use crate::allocation::ConditionSnapshot;
use crate::error::{Error, Result};
use crate::geometry::{
    arc_coordinate, boundary_distance, nearest_perimeter_point, next_corner_index, perimeter,
    point_at_arc, Point, Rect,
};
use crate::topology::TeamTopology;

/// A robot closer than this to its perimeter counts as on it.
const ON_PERIMETER_TOL: f64 = 1e-9;
const REGION_CHANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatrolParams {
    /// Maximum robot speed, m/s.
    pub v_max: f64,
    /// Lap-time threshold τ*, seconds.
    pub lap_threshold: f64,
    /// Half-width of the acceptable lap-time band around τ*, seconds.
    pub lap_band: f64,
    /// Integration step, seconds.
    pub sim_dt: f64,
}

impl PatrolParams {
    pub fn validate(&self, cycle_period: f64) -> Result<()> {
        if !(self.v_max > 0.0) {
            return Err(Error::Config(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        if !(self.lap_threshold > 0.0) {
            return Err(Error::Config(format!(
                "lap threshold must be positive, got {}",
                self.lap_threshold
            )));
        }
        if !(self.lap_band >= 0.0) {
            return Err(Error::Config("lap band must be non-negative".into()));
        }
        if !(self.sim_dt > 0.0) || self.sim_dt > cycle_period / 10.0 + 1e-12 {
            return Err(Error::Config(format!(
                "sim_dt must be positive and at most a tenth of the cycle period ({} s), got {}",
                cycle_period, self.sim_dt
            )));
        }
        Ok(())
    }

    pub fn within_band(&self, lap_time: f64) -> bool {
        (lap_time - self.lap_threshold).abs() <= self.lap_band
    }
}

/// One completed lap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LapRecord {
    pub duration: f64,
    pub completed_at: f64,
    /// The region changed, or the robot left its perimeter, during the lap.
    pub transitional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotKinematicState {
    pub position: Point,
    /// Index of the corner the robot is heading to (0 = bottom-left, CCW).
    pub waypoint: usize,
    /// Perimeter arc length covered in the current lap.
    pub lap_progress: f64,
    pub lap_started_at: f64,
    pub laps: Vec<LapRecord>,
    pub clock: f64,
    lap_region: Option<Rect>,
    lap_transitional: bool,
}

impl RobotKinematicState {
    pub fn new(position: Point) -> Self {
        RobotKinematicState {
            position,
            waypoint: 0,
            lap_progress: 0.0,
            lap_started_at: 0.0,
            laps: Vec::new(),
            clock: 0.0,
            lap_region: None,
            lap_transitional: false,
        }
    }

    pub fn lap_times(&self) -> Vec<f64> {
        self.laps.iter().map(|l| l.duration).collect()
    }

    /// Advances the robot by `dt` seconds at speed `v` on `region`.
    pub fn advance(&mut self, region: &Rect, v: f64, dt: f64) {
        debug_assert!(v >= 0.0 && dt > 0.0);
        let end = self.clock + dt;
        if region.is_empty() {
            self.lap_transitional = true;
            self.clock = end;
            return;
        }
        match self.lap_region {
            None => self.lap_region = Some(*region),
            Some(r) if region_changed(&r, region) => self.lap_transitional = true,
            _ => {}
        }

        let mut budget = v * dt;
        let gap = boundary_distance(self.position, region).unwrap_or(0.0);
        if gap > ON_PERIMETER_TOL {
            self.lap_transitional = true;
            let target = nearest_perimeter_point(self.position, region);
            if budget < gap {
                self.position = self.position.toward(target, budget);
                self.clock = end;
                return;
            }
            self.position = target;
            budget -= gap;
        }

        let s = arc_coordinate(self.position, region);
        let p = perimeter(region).expect("non-empty region");
        if budget > 0.0 {
            self.position = point_at_arc(region, s + budget);
            self.lap_progress += budget;
            while self.lap_progress >= p && v > 0.0 {
                let overshoot = self.lap_progress - p;
                let completed_at = end - overshoot / v;
                self.laps.push(LapRecord {
                    duration: completed_at - self.lap_started_at,
                    completed_at,
                    transitional: self.lap_transitional,
                });
                self.lap_started_at = completed_at;
                self.lap_progress = overshoot;
                self.lap_region = Some(*region);
                self.lap_transitional = false;
            }
        }
        self.waypoint = next_corner_index(region, arc_coordinate(self.position, region));
        self.clock = end;
    }
}

fn region_changed(a: &Rect, b: &Rect) -> bool {
    (a.min.x - b.min.x).abs() > REGION_CHANGE_TOL
        || (a.min.y - b.min.y).abs() > REGION_CHANGE_TOL
        || (a.max.x - b.max.x).abs() > REGION_CHANGE_TOL
        || (a.max.y - b.max.y).abs() > REGION_CHANGE_TOL
}

/// Functional form of [`RobotKinematicState::advance`].
pub fn step_robot(
    state: &RobotKinematicState,
    region: &Rect,
    v: f64,
    dt: f64,
) -> RobotKinematicState {
    let mut next = state.clone();
    next.advance(region, v, dt);
    next
}

/// Condition-limited speed κ·v_max.
///
/// κ is the robot's condition for an autonomous robot, and the minimum of
/// the robot's and all its operators' conditions otherwise.
pub fn able_velocity(
    snapshot: &ConditionSnapshot,
    topology: &TeamTopology,
    robot_index: usize,
    v_max: f64,
) -> Result<f64> {
    Ok(ability(snapshot, topology, robot_index)? * v_max)
}

/// κ for the robot at `robot_index`.
pub fn ability(
    snapshot: &ConditionSnapshot,
    topology: &TeamTopology,
    robot_index: usize,
) -> Result<f64> {
    let robot = *topology
        .robot_ids()
        .get(robot_index)
        .ok_or_else(|| Error::Config(format!("no robot at index {robot_index}")))?;
    let mut kappa = snapshot.robot_condition_of(robot)?;
    for operator in topology.operators_at(robot_index) {
        kappa = kappa.min(snapshot.operator_condition_of(*operator)?);
    }
    Ok(kappa)
}

/// Perimeter / τ*, clamped to `[0, v_max]`; zero for an empty region.
pub fn required_velocity(region: &Rect, lap_threshold: f64, v_max: f64) -> f64 {
    match perimeter(region) {
        Ok(p) => (p / lap_threshold).clamp(0.0, v_max),
        Err(_) => 0.0,
    }
}

pub fn commanded_velocity(v_able: f64, v_required: f64) -> f64 {
    v_able.min(v_required)
}

/// System patrol time for one lap index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LapStatus {
    Complete(f64),
    /// Some active robot has not finished this lap yet.
    Pending,
}

/// `T_L` for the 0-based `lap_index`: the slowest lap among robots that hold
/// a region (`active`).
pub fn system_patrol_time(lap_index: usize, lap_times: &[Vec<f64>], active: &[bool]) -> LapStatus {
    let mut worst: Option<f64> = None;
    for (times, is_active) in lap_times.iter().zip(active) {
        if !is_active {
            continue;
        }
        match times.get(lap_index) {
            Some(t) => worst = Some(worst.map_or(*t, |w| w.max(*t))),
            None => return LapStatus::Pending,
        }
    }
    worst.map_or(LapStatus::Pending, LapStatus::Complete)
}
