//! Parameter sweeps over K or team size.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::thread;

use crate::error::{Error, Result};

use super::engine::run_scenario_in;
use super::record::{fmt, fmt_opt, into_bytes, write_file, RunRecord};
use super::script::{OperatorAssignment, ScenarioScript};

pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const SWEEP_CURVES_FILE: &str = "sweep_curves.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    M,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "K",
            SweepAxis::M => "m",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepAxis::K),
            "m" | "M" => Ok(SweepAxis::M),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (expected K or m)"
            ))),
        }
    }
}

impl SweepAxis {
    /// The base script with this axis set to `value`.
    pub fn apply(self, base: &ScenarioScript, value: f64) -> Result<ScenarioScript> {
        let mut script = base.clone();
        match self {
            SweepAxis::K => script.params.k = value,
            SweepAxis::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "team size must be a positive integer, got {value}"
                    )));
                }
                if matches!(
                    script.topology.operators,
                    OperatorAssignment::Explicit { .. }
                ) {
                    return Err(Error::Config(
                        "cannot sweep team size with an explicit operator list".into(),
                    ));
                }
                script.topology.robots = value as usize;
            }
        }
        script.name = format!("{}_{}{}", base.name, self, value);
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

/// Runs one scenario per value, sequentially.
pub fn sweep(base: &ScenarioScript, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    sweep_parallel(base, axis, values, 1, None)
}

/// Runs one scenario per value on up to `jobs` threads. Results keep the
/// order of `values`.
pub fn sweep_parallel(
    base: &ScenarioScript,
    axis: SweepAxis,
    values: &[f64],
    jobs: usize,
    base_dir: Option<&Path>,
) -> Result<SweepResult> {
    let scripts = values
        .iter()
        .map(|v| axis.apply(base, *v))
        .collect::<Result<Vec<_>>>()?;
    for s in &scripts {
        s.validate()?;
    }
    let jobs = jobs.clamp(1, scripts.len().max(1));
    let mut records: Vec<Option<Result<RunRecord>>> = (0..scripts.len()).map(|_| None).collect();
    thread::scope(|scope| {
        for (chunk_scripts, chunk_out) in scripts
            .chunks(scripts.len().div_ceil(jobs).max(1))
            .zip(records.chunks_mut(scripts.len().div_ceil(jobs).max(1)))
        {
            scope.spawn(move || {
                for (script, slot) in chunk_scripts.iter().zip(chunk_out) {
                    log::info!("sweep: running {}", script.name);
                    *slot = Some(run_scenario_in(script, base_dir));
                }
            });
        }
    });
    let points = values
        .iter()
        .zip(records)
        .map(|(value, rec)| {
            Ok(SweepPoint {
                value: *value,
                record: rec.expect("every slot is filled")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, points })
}

impl SweepResult {
    /// One row per value: axis, value, convergence time, initial and final
    /// error, largest completed T_L.
    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "axis",
            "value",
            "convergence_time_s",
            "initial_error",
            "final_error",
            "max_t_l_s",
        ])?;
        for p in &self.points {
            let s = &p.record.summary;
            w.write_record([
                self.axis.to_string(),
                fmt(p.value),
                fmt_opt(s.convergence_time_s),
                fmt_opt(s.initial_error),
                fmt_opt(s.final_error),
                fmt_opt(s.max_t_l_s),
            ])?;
        }
        into_bytes(w)
    }

    /// Error-versus-time curves for every value, long format.
    pub fn curves_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "value", "time_s", "transition_error"])?;
        for p in &self.points {
            for (t, e) in &p.record.error_series {
                w.write_record([self.axis.to_string(), fmt(p.value), fmt(*t), fmt(*e)])?;
            }
        }
        into_bytes(w)
    }

    /// Writes the two sweep tables plus one run directory per value.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(SWEEP_SUMMARY_FILE), &self.summary_csv()?)?;
        write_file(&dir.join(SWEEP_CURVES_FILE), &self.curves_csv()?)?;
        for p in &self.points {
            p.record
                .write_dir(&dir.join(format!("{}_{}", self.axis, fmt(p.value))))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    fn short_s4() -> ScenarioScript {
        let mut s = builtin::s4();
        s.duration_s = 20.0;
        s
    }

    #[test]
    fn axis_parses() {
        assert_eq!("K".parse::<SweepAxis>().unwrap(), SweepAxis::K);
        assert_eq!("m".parse::<SweepAxis>().unwrap(), SweepAxis::M);
        assert!("q".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn team_size_must_be_integer() {
        assert!(SweepAxis::M.apply(&short_s4(), 10.5).is_err());
        assert!(SweepAxis::M.apply(&builtin::s1(), 4.0).is_err());
    }

    #[test]
    fn parallel_matches_sequential_order() {
        let values = [1.0, 3.0, 5.0];
        let seq = sweep(&short_s4(), SweepAxis::K, &values).unwrap();
        let par = sweep_parallel(&short_s4(), SweepAxis::K, &values, 3, None).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.points[1].record.summary.name, "s4_K3");
    }

    #[test]
    fn summary_has_one_row_per_value() {
        let res = sweep(&short_s4(), SweepAxis::K, &[1.0, 10.0]).unwrap();
        let text = String::from_utf8(res.summary_csv().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("K,10,"));
    }
}
