//! Vertical-strip decomposition of the global workspace.

use serde::{Deserialize, Serialize};

use crate::allocation::WorkloadVector;
use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// The rectangle the whole team patrols, with the clearance kept between
/// neighbouring regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalWorkspace {
    pub origin: Point,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub safety_gap: f64,
}

impl GlobalWorkspace {
    pub fn new(origin: Point, width: f64, height: f64, safety_gap: f64) -> Result<Self> {
        let ws = GlobalWorkspace {
            origin,
            width,
            height,
            safety_gap,
        };
        ws.validate()?;
        Ok(ws)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Config(format!(
                "workspace must have positive size, got {} x {}",
                self.width, self.height
            )));
        }
        if !(self.safety_gap >= 0.0) {
            return Err(Error::Config(format!(
                "safety gap must be non-negative, got {}",
                self.safety_gap
            )));
        }
        Ok(())
    }

    /// Checks that `robots` strips and their gaps fit across the width.
    pub fn check_fits(&self, robots: usize) -> Result<()> {
        if robots as f64 * self.safety_gap >= self.width {
            return Err(Error::Infeasible(format!(
                "{robots} robots with safety gap {} do not fit in width {}",
                self.safety_gap, self.width
            )));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Rect {
        Rect::from_origin(self.origin, self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspacePartition {
    pub regions: Vec<Rect>,
    pub parent: GlobalWorkspace,
}

impl WorkspacePartition {
    pub fn region(&self, index: usize) -> &Rect {
        &self.regions[index]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Area of each region divided by the total allocated area.
    pub fn area_fractions(&self) -> Vec<f64> {
        let total: f64 = self.regions.iter().map(Rect::area).sum();
        self.regions.iter().map(|r| r.area() / total).collect()
    }
}

/// Lays out full-height vertical strips left to right in robot order.
///
/// Strip `i` is `σ_i · (width − g·δ)` wide, where `g` is one less than the
/// number of non-zero shares. Robots with a zero share get an empty region
/// and no gap, so the remaining strips stay contiguous.
pub fn partition_from_workload(
    workspace: &GlobalWorkspace,
    sigma: &WorkloadVector,
) -> Result<WorkspacePartition> {
    workspace.validate()?;
    if let Some(bad) = sigma.shares.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Config(format!(
            "negative or NaN workload share {bad}"
        )));
    }
    let active = sigma.shares.iter().filter(|s| **s > 0.0).count();
    if active == 0 {
        return Err(Error::Infeasible("every workload share is zero".into()));
    }
    let usable = workspace.width - (active - 1) as f64 * workspace.safety_gap;
    if usable <= 0.0 {
        return Err(Error::Infeasible(format!(
            "usable width {usable} after {} gaps of {}",
            active - 1,
            workspace.safety_gap
        )));
    }

    let (y0, y1) = (workspace.origin.y, workspace.origin.y + workspace.height);
    let mut regions = Vec::with_capacity(sigma.len());
    let mut before = 0.0_f64;
    let mut gaps = 0usize;
    for share in &sigma.shares {
        let left = workspace.origin.x + usable * before + gaps as f64 * workspace.safety_gap;
        if *share > 0.0 {
            let right = left + usable * share;
            regions.push(Rect::new(Point::new(left, y0), Point::new(right, y1)));
            before += share;
            gaps += 1;
        } else {
            // zero-width strip parked at the current cursor
            regions.push(Rect::new(Point::new(left, y0), Point::new(left, y1)));
        }
    }
    Ok(WorkspacePartition {
        regions,
        parent: *workspace,
    })
}
