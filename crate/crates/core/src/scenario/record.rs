//! Run records and their on-disk form.
//!
//! A run directory holds `cycles.csv` (one row per robot per recorded
//! cycle), `laps.csv`, `partitions.jsonl`, `summary.json` and, when
//! trajectory sampling is on, `trajectory.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::WorkloadVector;
use crate::error::{Error, Result};
use crate::partition::{partition_from_workload, GlobalWorkspace};
use crate::topology::RobotId;

pub const CYCLES_FILE: &str = "cycles.csv";
pub const LAPS_FILE: &str = "laps.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const PARTITIONS_FILE: &str = "partitions.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRow {
    pub cycle: u64,
    pub time_s: f64,
    pub robots: Vec<RobotId>,
    /// σ(t) at the start of the cycle.
    pub sigma: Vec<f64>,
    /// σ′(t); absent when no robot was capable.
    pub sigma_proposed: Option<Vec<f64>>,
    pub q_f: Option<f64>,
    pub k_e: Option<f64>,
    pub kappa: Vec<f64>,
    /// Commanded speed for the interval following this cycle.
    pub velocity: Vec<f64>,
    /// Σ|σ − σ′|.
    pub transition_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapRow {
    pub robot: RobotId,
    /// 1-based lap number.
    pub lap: usize,
    pub lap_time_s: f64,
    pub completed_at_s: f64,
    pub transitional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time_s: f64,
    pub robot: RobotId,
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

/// System patrol time for one lap number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatrolLap {
    /// 1-based lap number.
    pub lap: usize,
    /// `None` while some robot holding a region has not finished the lap.
    pub t_l_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub cycles_run: u64,
    pub robots: Vec<RobotId>,
    pub initial_error: Option<f64>,
    pub final_error: Option<f64>,
    /// Start of the last stretch of cycles below ε that the run ended in;
    /// `None` if the error was above ε at the end.
    pub convergence_time_s: Option<f64>,
    pub final_sigma: Vec<f64>,
    pub final_sigma_proposed: Option<Vec<f64>>,
    pub patrol_laps: Vec<PatrolLap>,
    pub max_t_l_s: Option<f64>,
    /// Cycles in which no robot was capable and σ was frozen.
    pub no_capable_agent_cycles: u64,
    /// Largest |Σσ − 1| seen over all cycles.
    pub max_sum_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cycles: Vec<CycleRow>,
    /// `(time_s, Σ|σ − σ′|)` for every cycle, recorded or not.
    pub error_series: Vec<(f64, f64)>,
    pub laps: Vec<LapRow>,
    pub trajectory: Vec<TrajectoryRow>,
    pub workspace: GlobalWorkspace,
    pub summary: RunSummary,
}

impl RunRecord {
    /// T_L for a 1-based lap number, if complete.
    pub fn patrol_time(&self, lap: usize) -> Option<f64> {
        self.summary
            .patrol_laps
            .iter()
            .find(|l| l.lap == lap)
            .and_then(|l| l.t_l_s)
    }

    pub fn laps_of(&self, robot: RobotId) -> impl Iterator<Item = &LapRow> {
        self.laps.iter().filter(move |l| l.robot == robot)
    }

    pub fn cycles_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cycle",
            "time_s",
            "robot",
            "sigma",
            "sigma_proposed",
            "q_f",
            "k_e",
            "kappa",
            "v",
            "transition_error",
        ])?;
        for row in &self.cycles {
            for (i, robot) in row.robots.iter().enumerate() {
                let proposed = row.sigma_proposed.as_ref().map(|p| p[i]);
                w.write_record([
                    row.cycle.to_string(),
                    fmt(row.time_s),
                    robot.0.to_string(),
                    fmt(row.sigma[i]),
                    fmt_opt(proposed),
                    fmt_opt(row.q_f),
                    fmt_opt(row.k_e),
                    fmt(row.kappa[i]),
                    fmt(row.velocity[i]),
                    fmt_opt(row.transition_error),
                ])?;
            }
        }
        into_bytes(w)
    }

    pub fn laps_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "robot",
            "lap",
            "lap_time_s",
            "completed_at_s",
            "transitional",
        ])?;
        for l in &self.laps {
            w.write_record([
                l.robot.0.to_string(),
                l.lap.to_string(),
                fmt(l.lap_time_s),
                fmt(l.completed_at_s),
                l.transitional.to_string(),
            ])?;
        }
        into_bytes(w)
    }

    pub fn trajectory_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time_s", "robot", "x", "y", "v"])?;
        for r in &self.trajectory {
            w.write_record([
                fmt(r.time_s),
                r.robot.0.to_string(),
                fmt(r.x),
                fmt(r.y),
                fmt(r.v),
            ])?;
        }
        into_bytes(w)
    }

    /// One JSON object per recorded cycle with every robot's rectangle.
    pub fn partitions_jsonl(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct RegionOut {
            robot: RobotId,
            min: [f64; 2],
            max: [f64; 2],
        }
        #[derive(Serialize)]
        struct CycleOut {
            cycle: u64,
            time_s: f64,
            regions: Vec<RegionOut>,
        }
        let mut out = Vec::new();
        for row in &self.cycles {
            let sigma = WorkloadVector::new(row.sigma.clone(), row.cycle);
            let regions = match partition_from_workload(&self.workspace, &sigma) {
                Ok(p) => row
                    .robots
                    .iter()
                    .zip(&p.regions)
                    .map(|(robot, r)| RegionOut {
                        robot: *robot,
                        min: [r.min.x, r.min.y],
                        max: [r.max.x, r.max.y],
                    })
                    .collect(),
                Err(_) => Vec::new(),
            };
            serde_json::to_writer(
                &mut out,
                &CycleOut {
                    cycle: row.cycle,
                    time_s: row.time_s,
                    regions,
                },
            )?;
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn summary_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(&self.summary)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Writes the run directory, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(CYCLES_FILE), &self.cycles_csv()?)?;
        write_file(&dir.join(LAPS_FILE), &self.laps_csv()?)?;
        write_file(&dir.join(PARTITIONS_FILE), &self.partitions_jsonl()?)?;
        write_file(&dir.join(SUMMARY_FILE), &self.summary_json()?)?;
        if !self.trajectory.is_empty() {
            write_file(&dir.join(TRAJECTORY_FILE), &self.trajectory_csv()?)?;
        }
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn record() -> RunRecord {
        let ws = GlobalWorkspace::new(Point::new(0.0, 0.0), 10.0, 2.0, 0.0).unwrap();
        RunRecord {
            cycles: vec![CycleRow {
                cycle: 0,
                time_s: 0.0,
                robots: vec![RobotId(1), RobotId(2)],
                sigma: vec![0.5, 0.5],
                sigma_proposed: None,
                q_f: Some(0.25),
                k_e: None,
                kappa: vec![1.0, 0.5],
                velocity: vec![0.0, 0.0],
                transition_error: None,
            }],
            error_series: Vec::new(),
            laps: Vec::new(),
            trajectory: Vec::new(),
            workspace: ws,
            summary: RunSummary {
                name: "t".into(),
                cycles_run: 1,
                robots: vec![RobotId(1), RobotId(2)],
                initial_error: None,
                final_error: None,
                convergence_time_s: None,
                final_sigma: vec![0.5, 0.5],
                final_sigma_proposed: None,
                patrol_laps: vec![PatrolLap {
                    lap: 1,
                    t_l_s: Some(64.5),
                }],
                max_t_l_s: Some(64.5),
                no_capable_agent_cycles: 0,
                max_sum_deviation: 0.0,
            },
        }
    }

    #[test]
    fn cycles_csv_is_long_format_with_blank_missing_values() {
        let text = String::from_utf8(record().cycles_csv().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,0,1,0.5,,0.25,,1,0,");
        assert_eq!(lines[2], "0,0,2,0.5,,0.25,,0.5,0,");
    }

    #[test]
    fn partitions_follow_sigma() {
        let text = String::from_utf8(record().partitions_jsonl().unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["regions"][1]["min"][0], 5.0);
    }

    #[test]
    fn patrol_time_lookup() {
        let r = record();
        assert_eq!(r.patrol_time(1), Some(64.5));
        assert_eq!(r.patrol_time(2), None);
    }
}
