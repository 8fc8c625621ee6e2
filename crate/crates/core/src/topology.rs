//! Team connectivity: robots, operators and the bipartite teleoperation graph.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Robot index (1-based, as robots are numbered R_1..R_m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub usize);

/// Operator index (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorId(pub usize);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.0)
    }
}

/// Undirected operator-robot graph.
///
/// Edges only ever join a robot to an operator. A robot with no operators is
/// autonomous; otherwise it is human-operated. One operator may drive several
/// robots and one robot may have several operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamTopology {
    robot_ids: Vec<RobotId>,
    operator_ids: Vec<OperatorId>,
    edges: BTreeSet<(RobotId, OperatorId)>,
    // operators of each robot, index-aligned with robot_ids
    operators_of: Vec<Vec<OperatorId>>,
}

impl TeamTopology {
    pub fn new(
        robot_ids: Vec<RobotId>,
        operator_ids: Vec<OperatorId>,
        edges: impl IntoIterator<Item = (RobotId, OperatorId)>,
    ) -> Result<Self> {
        check_unique(&robot_ids, "robot")?;
        check_unique(&operator_ids, "operator")?;
        let mut topology = TeamTopology {
            robot_ids,
            operator_ids,
            edges: BTreeSet::new(),
            operators_of: Vec::new(),
        };
        for (robot, operator) in edges {
            topology.check_edge(robot, operator)?;
            topology.edges.insert((robot, operator));
        }
        topology.rebuild();
        Ok(topology)
    }

    /// `m` autonomous robots R_1..R_m and no operators.
    pub fn autonomous(m: usize) -> Self {
        Self::new((1..=m).map(RobotId).collect(), Vec::new(), []).expect("generated ids are unique")
    }

    /// `m` robots where every odd-indexed robot R_i is driven by its own
    /// operator O_i and even-indexed robots are autonomous.
    pub fn odd_operated(m: usize) -> Self {
        let robots: Vec<_> = (1..=m).map(RobotId).collect();
        let operators: Vec<_> = (1..=m).step_by(2).map(OperatorId).collect();
        let edges: Vec<_> = operators.iter().map(|o| (RobotId(o.0), *o)).collect();
        Self::new(robots, operators, edges).expect("generated ids are unique")
    }

    pub fn robot_ids(&self) -> &[RobotId] {
        &self.robot_ids
    }

    pub fn operator_ids(&self) -> &[OperatorId] {
        &self.operator_ids
    }

    pub fn edges(&self) -> impl Iterator<Item = (RobotId, OperatorId)> + '_ {
        self.edges.iter().copied()
    }

    /// Number of robots `m`.
    pub fn robot_count(&self) -> usize {
        self.robot_ids.len()
    }

    /// Number of operators `h`.
    pub fn operator_count(&self) -> usize {
        self.operator_ids.len()
    }

    pub fn robot_index(&self, robot: RobotId) -> Option<usize> {
        self.robot_ids.iter().position(|r| *r == robot)
    }

    pub fn has_robot(&self, robot: RobotId) -> bool {
        self.robot_index(robot).is_some()
    }

    pub fn has_operator(&self, operator: OperatorId) -> bool {
        self.operator_ids.contains(&operator)
    }

    /// Operators connected to the robot at position `index` (Λ_i).
    pub fn operators_at(&self, index: usize) -> &[OperatorId] {
        &self.operators_of[index]
    }

    pub fn operators_of(&self, robot: RobotId) -> Option<&[OperatorId]> {
        self.robot_index(robot).map(|i| self.operators_at(i))
    }

    pub fn is_autonomous_at(&self, index: usize) -> bool {
        self.operators_of[index].is_empty()
    }

    /// Robots with no operator (I_A).
    pub fn autonomous_robots(&self) -> Vec<RobotId> {
        self.robot_ids
            .iter()
            .zip(&self.operators_of)
            .filter(|(_, ops)| ops.is_empty())
            .map(|(r, _)| *r)
            .collect()
    }

    /// Robots with at least one operator (I_H).
    pub fn human_operated_robots(&self) -> Vec<RobotId> {
        self.robot_ids
            .iter()
            .zip(&self.operators_of)
            .filter(|(_, ops)| !ops.is_empty())
            .map(|(r, _)| *r)
            .collect()
    }

    pub fn add_robot(&mut self, robot: RobotId) -> Result<()> {
        if self.has_robot(robot) {
            return Err(Error::Config(format!("robot {robot} already exists")));
        }
        self.robot_ids.push(robot);
        self.operators_of.push(Vec::new());
        Ok(())
    }

    pub fn add_operator(&mut self, operator: OperatorId) -> Result<()> {
        if self.has_operator(operator) {
            return Err(Error::Config(format!("operator {operator} already exists")));
        }
        self.operator_ids.push(operator);
        Ok(())
    }

    pub fn connect(&mut self, robot: RobotId, operator: OperatorId) -> Result<()> {
        self.check_edge(robot, operator)?;
        self.edges.insert((robot, operator));
        self.rebuild();
        Ok(())
    }

    /// Removes an edge; returns whether it existed.
    pub fn disconnect(&mut self, robot: RobotId, operator: OperatorId) -> bool {
        let removed = self.edges.remove(&(robot, operator));
        if removed {
            self.rebuild();
        }
        removed
    }

    fn check_edge(&self, robot: RobotId, operator: OperatorId) -> Result<()> {
        if !self.has_robot(robot) {
            return Err(Error::Config(format!(
                "edge references unknown robot {robot}"
            )));
        }
        if !self.has_operator(operator) {
            return Err(Error::Config(format!(
                "edge references unknown operator {operator}"
            )));
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        self.operators_of = self
            .robot_ids
            .iter()
            .map(|r| {
                self.edges
                    .range((*r, OperatorId(0))..=(*r, OperatorId(usize::MAX)))
                    .map(|(_, o)| *o)
                    .collect()
            })
            .collect();
    }
}

fn check_unique<T: Ord + Copy + fmt::Display>(ids: &[T], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(*id) {
            return Err(Error::Config(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}
