//! Distance-gated transition from the actual workload σ toward the
//! proposed workload σ′.
//!
//! Each cycle applies `σ(t+1) = σ(t) + K_e · (σ′(t) − σ(t))` with
//! `K_e = 1 − exp(−K · q_f)`, where `q_f` is the smallest distance from any
//! active robot to the boundary of its proposed region.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::allocation::{compensated_sum, propose_allocation, ConditionSnapshot, WorkloadVector};
use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, segment_distance, Point, Rect};
use crate::partition::{partition_from_workload, GlobalWorkspace, WorkspacePartition};
use crate::topology::TeamTopology;

/// Shares driven to a zero proposal are snapped to exactly zero once they
/// fall below this value.
pub const ZERO_SETTLE_THRESHOLD: f64 = 1e-12;

/// Which part of a proposed region's boundary `q_c` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// The whole perimeter of the proposed region.
    #[default]
    FullPerimeter,
    /// Only the edges that moved relative to the current region.
    MovedSegments,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    /// Scaling constant K (per meter).
    pub k: f64,
    /// Allocation cycle period τ in seconds.
    pub cycle_period: f64,
    pub boundary_mode: BoundaryMode,
}

impl TransitionParams {
    pub fn new(k: f64, cycle_period: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("K must be positive, got {k}")));
        }
        if !(cycle_period > 0.0 && cycle_period.is_finite()) {
            return Err(Error::Config(format!(
                "cycle period must be positive, got {cycle_period}"
            )));
        }
        Ok(TransitionParams {
            k,
            cycle_period,
            boundary_mode: BoundaryMode::FullPerimeter,
        })
    }

    /// τ = max of the providers' cycle times.
    pub fn from_provider_cycles(k: f64, cycle_times: &[f64]) -> Result<Self> {
        let tau = cycle_times.iter().copied().fold(0.0_f64, f64::max);
        Self::new(k, tau)
    }

    pub fn with_boundary_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    /// Fails if any provider cycles slower than τ.
    pub fn check_provider_cycles(&self, cycle_times: &[f64]) -> Result<()> {
        match cycle_times.iter().find(|c| **c > self.cycle_period) {
            Some(c) => Err(Error::Config(format!(
                "provider cycle time {c} s exceeds allocation cycle period {} s",
                self.cycle_period
            ))),
            None => Ok(()),
        }
    }
}

/// Result of one allocation cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionState {
    /// Actual workload after this cycle's step.
    pub sigma: WorkloadVector,
    /// Proposed workload σ′ for this cycle.
    pub sigma_proposed: WorkloadVector,
    pub q_f: f64,
    pub k_e: f64,
}

/// Smallest distance from a non-failed robot to its proposed region's
/// perimeter.
///
/// `failed` holds positional indices. Robots with an empty proposed region
/// are skipped as well.
pub fn compute_q_f(
    positions: &[Point],
    proposed: &WorkspacePartition,
    failed: &BTreeSet<usize>,
) -> Result<f64> {
    check_aligned(positions, proposed)?;
    let mut best: Option<f64> = None;
    for (i, (position, region)) in positions.iter().zip(&proposed.regions).enumerate() {
        if failed.contains(&i) {
            continue;
        }
        if region.is_empty() {
            log::debug!("robot index {i} has an empty proposed region; excluded from q_f");
            continue;
        }
        let d = boundary_distance(*position, region)?;
        best = Some(best.map_or(d, |b| b.min(d)));
    }
    best.ok_or(Error::NoActiveAgents)
}

/// Like [`compute_q_f`] but measures each robot only against the edges of
/// its proposed region that moved relative to `current`. Robots whose region
/// did not move do not constrain `q_f`; if no region moved, `q_f` is zero.
pub fn compute_q_f_moved_segments(
    positions: &[Point],
    current: &WorkspacePartition,
    proposed: &WorkspacePartition,
    failed: &BTreeSet<usize>,
) -> Result<f64> {
    check_aligned(positions, proposed)?;
    check_aligned(positions, current)?;
    let mut best: Option<f64> = None;
    let mut any_active = false;
    for (i, (position, region)) in positions.iter().zip(&proposed.regions).enumerate() {
        if failed.contains(&i) || region.is_empty() {
            continue;
        }
        any_active = true;
        for (a, b) in moved_edges(&current.regions[i], region) {
            let d = segment_distance(*position, a, b);
            best = Some(best.map_or(d, |x| x.min(d)));
        }
    }
    if !any_active {
        return Err(Error::NoActiveAgents);
    }
    Ok(best.unwrap_or(0.0))
}

fn moved_edges(current: &Rect, proposed: &Rect) -> Vec<(Point, Point)> {
    const TOL: f64 = 1e-12;
    let edges = proposed.edges();
    if current.is_empty() {
        return edges.to_vec();
    }
    let moved = [
        (current.min.y - proposed.min.y).abs() > TOL,
        (current.max.x - proposed.max.x).abs() > TOL,
        (current.max.y - proposed.max.y).abs() > TOL,
        (current.min.x - proposed.min.x).abs() > TOL,
    ];
    edges
        .into_iter()
        .zip(moved)
        .filter(|(_, m)| *m)
        .map(|(e, _)| e)
        .collect()
}

fn check_aligned(positions: &[Point], partition: &WorkspacePartition) -> Result<()> {
    if positions.len() != partition.len() {
        return Err(Error::Config(format!(
            "{} positions for {} regions",
            positions.len(),
            partition.len()
        )));
    }
    Ok(())
}

/// `K_e = 1 − exp(−K · q_f)`.
pub fn transition_coefficient(q_f: f64, k: f64) -> f64 {
    debug_assert!(q_f >= 0.0 && k > 0.0, "q_f = {q_f}, K = {k}");
    -(-k * q_f).exp_m1()
}

/// One transition step: `σ_i + K_e · (σ′_i − σ_i)` for every robot.
pub fn step_transition(
    current: &WorkloadVector,
    proposed: &WorkloadVector,
    k_e: f64,
) -> Result<WorkloadVector> {
    if current.len() != proposed.len() {
        return Err(Error::Config(format!(
            "workload length mismatch: {} actual vs {} proposed",
            current.len(),
            proposed.len()
        )));
    }
    debug_assert!((0.0..=1.0).contains(&k_e), "K_e = {k_e}");
    let shares = current
        .shares
        .iter()
        .zip(&proposed.shares)
        .map(|(s, p)| s + k_e * (p - s))
        .collect();
    Ok(WorkloadVector::new(shares, proposed.timestamp))
}

/// Snaps shares whose proposal is exactly zero to zero once they drop below
/// [`ZERO_SETTLE_THRESHOLD`], handing the residue to the robots with a
/// non-zero proposal in proportion to σ′. Returns the indices that settled.
pub fn settle_zero_shares(sigma: &mut WorkloadVector, proposed: &WorkloadVector) -> Vec<usize> {
    let settled: Vec<usize> = (0..sigma.len())
        .filter(|&i| {
            proposed.shares[i] == 0.0
                && sigma.shares[i] != 0.0
                && sigma.shares[i].abs() < ZERO_SETTLE_THRESHOLD
        })
        .collect();
    if settled.is_empty() {
        return settled;
    }
    let residue = compensated_sum(settled.iter().map(|&i| sigma.shares[i]));
    for &i in &settled {
        sigma.shares[i] = 0.0;
    }
    for (s, p) in sigma.shares.iter_mut().zip(&proposed.shares) {
        if *p > 0.0 {
            *s += residue * p;
        }
    }
    settled
}

/// Proposal, partition preview, `q_f`, `K_e` and the transition step for one
/// cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub state: TransitionState,
    pub proposed_partition: WorkspacePartition,
}

/// Runs one allocation cycle.
///
/// On [`Error::NoCapableAgent`] nothing is stepped; the caller keeps the
/// current workload.
pub fn allocation_cycle(
    topology: &TeamTopology,
    snapshot: &ConditionSnapshot,
    positions: &[Point],
    current: &WorkloadVector,
    params: &TransitionParams,
    workspace: &GlobalWorkspace,
    failed: &BTreeSet<usize>,
) -> Result<CycleOutcome> {
    if current.len() != topology.robot_count() {
        return Err(Error::Config(format!(
            "workload has {} shares for {} robots",
            current.len(),
            topology.robot_count()
        )));
    }
    let proposed = propose_allocation(topology, snapshot)?;
    let proposed_partition = partition_from_workload(workspace, &proposed)?;
    let q_f = match params.boundary_mode {
        BoundaryMode::FullPerimeter => compute_q_f(positions, &proposed_partition, failed)?,
        BoundaryMode::MovedSegments => {
            let current_partition = partition_from_workload(workspace, current)?;
            compute_q_f_moved_segments(positions, &current_partition, &proposed_partition, failed)?
        }
    };
    let k_e = transition_coefficient(q_f, params.k);
    let mut sigma = step_transition(current, &proposed, k_e)?;
    for i in settle_zero_shares(&mut sigma, &proposed) {
        log::debug!("share of robot index {i} settled to zero");
    }
    Ok(CycleOutcome {
        state: TransitionState {
            sigma,
            sigma_proposed: proposed,
            q_f,
            k_e,
        },
        proposed_partition,
    })
}
