//! Condition- and performance-driven workload proposal.
//!
//! Every robot receives an input score built from its own condition, its
//! performance and the condition of each operator driving it. The score is
//! gated by the weakest of those metrics, so a single incapacitated agent
//! zeroes the robot's share. Scores are then normalized into a proposed
//! workload vector σ′ that sums to one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{OperatorId, RobotId, TeamTopology};

/// Below this total input score the team is considered incapacitated.
pub const NO_CAPABLE_AGENT_THRESHOLD: f64 = 1e-12;

/// Normalized metrics observed during one allocation cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionSnapshot {
    pub robot_condition: BTreeMap<RobotId, f64>,
    pub operator_condition: BTreeMap<OperatorId, f64>,
    pub robot_performance: BTreeMap<RobotId, f64>,
    pub timestamp: u64,
}

impl ConditionSnapshot {
    /// Every robot and operator of `topology` at full condition and performance.
    pub fn healthy(topology: &TeamTopology) -> Self {
        ConditionSnapshot {
            robot_condition: topology.robot_ids().iter().map(|r| (*r, 1.0)).collect(),
            operator_condition: topology.operator_ids().iter().map(|o| (*o, 1.0)).collect(),
            robot_performance: topology.robot_ids().iter().map(|r| (*r, 1.0)).collect(),
            timestamp: 0,
        }
    }

    pub fn with_robot_condition(mut self, robot: RobotId, value: f64) -> Self {
        self.robot_condition.insert(robot, value);
        self
    }

    pub fn with_operator_condition(mut self, operator: OperatorId, value: f64) -> Self {
        self.operator_condition.insert(operator, value);
        self
    }

    pub fn with_robot_performance(mut self, robot: RobotId, value: f64) -> Self {
        self.robot_performance.insert(robot, value);
        self
    }

    pub fn robot_condition_of(&self, robot: RobotId) -> Result<f64> {
        lookup(&self.robot_condition, robot, "robot condition")
    }

    pub fn robot_performance_of(&self, robot: RobotId) -> Result<f64> {
        lookup(&self.robot_performance, robot, "robot performance")
    }

    pub fn operator_condition_of(&self, operator: OperatorId) -> Result<f64> {
        lookup(&self.operator_condition, operator, "operator condition")
    }
}

fn lookup<K: Ord + Copy + std::fmt::Display>(
    map: &BTreeMap<K, f64>,
    key: K,
    what: &str,
) -> Result<f64> {
    let value = *map
        .get(&key)
        .ok_or_else(|| Error::Config(format!("missing {what} for {key}")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Domain {
            source_name: format!("{what} of {key}"),
            value,
            lower: 0.0,
            upper: 1.0,
        });
    }
    Ok(value)
}

/// Workload fractions, index-aligned with the topology's robot order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadVector {
    pub shares: Vec<f64>,
    pub timestamp: u64,
}

impl WorkloadVector {
    pub fn new(shares: Vec<f64>, timestamp: u64) -> Self {
        WorkloadVector { shares, timestamp }
    }

    /// Equal split among `m` robots.
    pub fn uniform(m: usize) -> Self {
        WorkloadVector::new(vec![1.0 / m as f64; m], 0)
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.shares.iter().copied())
    }

    /// Σ_i |σ_i − other_i|.
    pub fn l1_distance(&self, other: &WorkloadVector) -> f64 {
        compensated_sum(
            self.shares
                .iter()
                .zip(&other.shares)
                .map(|(a, b)| (a - b).abs()),
        )
    }
}

/// Neumaier-compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut compensation = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Per-robot input scores S.
///
/// Human-operated robot: γ/(|Λ|+2) · (ĉʳ + Σ ĉᵒ + p̂ʳ), γ the minimum of all
/// those metrics. Autonomous robot: γ/2 · (ĉʳ + p̂ʳ), γ = min(ĉʳ, p̂ʳ).
pub fn compute_input_vector(
    topology: &TeamTopology,
    snapshot: &ConditionSnapshot,
) -> Result<Vec<f64>> {
    topology
        .robot_ids()
        .iter()
        .enumerate()
        .map(|(index, robot)| {
            let condition = snapshot.robot_condition_of(*robot)?;
            let performance = snapshot.robot_performance_of(*robot)?;
            let mut gate = condition.min(performance);
            let mut bracket = condition;
            for operator in topology.operators_at(index) {
                let c = snapshot.operator_condition_of(*operator)?;
                gate = gate.min(c);
                bracket += c;
            }
            bracket += performance;
            let terms = (topology.operators_at(index).len() + 2) as f64;
            Ok(gate * (bracket / terms))
        })
        .collect()
}

/// Proposed workload σ′_i = S_i / Σ S.
pub fn propose_allocation(
    topology: &TeamTopology,
    snapshot: &ConditionSnapshot,
) -> Result<WorkloadVector> {
    let scores = compute_input_vector(topology, snapshot)?;
    normalize_scores(&scores, snapshot.timestamp)
}

pub(crate) fn normalize_scores(scores: &[f64], timestamp: u64) -> Result<WorkloadVector> {
    let total = compensated_sum(scores.iter().copied());
    if total < NO_CAPABLE_AGENT_THRESHOLD {
        return Err(Error::NoCapableAgent);
    }
    Ok(WorkloadVector::new(
        scores.iter().map(|s| s / total).collect(),
        timestamp,
    ))
}
