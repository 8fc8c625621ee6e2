//! Condition-aware workload allocation for multi-human multi-robot patrol
//! teams.
//!
//! Each allocation cycle scores every robot from the condition of its
//! operators and itself, normalizes the scores into a proposed workload
//! split, and moves the current split toward it at a rate limited by how
//! far the robots are from their new regions. The workspace is divided
//! into vertical strips sized by workload, and robots patrol the strip
//! perimeters.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod partition;
pub mod patrol;
pub mod scenario;
pub mod topology;
pub mod transition;

pub use allocation::{
    compensated_sum, compute_input_vector, propose_allocation, ConditionSnapshot, WorkloadVector,
};
pub use error::{Error, Result};
pub use geometry::{boundary_distance, perimeter, Point, Rect};
pub use partition::{partition_from_workload, GlobalWorkspace, WorkspacePartition};
pub use topology::{OperatorId, RobotId, TeamTopology};
pub use transition::{
    allocation_cycle, compute_q_f, step_transition, transition_coefficient, BoundaryMode,
    TransitionParams, TransitionState,
};
