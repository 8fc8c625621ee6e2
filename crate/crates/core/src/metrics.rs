//! Condition and performance providers: normalization, stress traces,
//! discrete stress levels and the cross-track patrolling metric.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, perimeter, Point, Rect};

/// Default moving-average window, in samples.
pub const DEFAULT_STRESS_WINDOW: usize = 30;

/// Raw range `[lower, upper]` of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub lower: f64,
    pub upper: f64,
}

impl MetricBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Config(format!(
                "metric bounds must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(MetricBounds { lower, upper })
    }

    /// Already-normalized metric.
    pub const fn unit() -> Self {
        MetricBounds {
            lower: 0.0,
            upper: 1.0,
        }
    }

    /// `(raw − lower) / (upper − lower)`, rejecting values outside the bounds.
    pub fn normalize(&self, raw: f64, source_name: &str) -> Result<f64> {
        if !(raw >= self.lower && raw <= self.upper) {
            return Err(Error::Domain {
                source_name: source_name.to_string(),
                value: raw,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(((raw - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0))
    }
}

impl Default for MetricBounds {
    fn default() -> Self {
        Self::unit()
    }
}

pub fn normalize_metric(raw: f64, bounds: &MetricBounds) -> Result<f64> {
    bounds.normalize(raw, "metric")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressLevel {
    Low,
    Medium,
    High,
}

impl FromStr for StressLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(StressLevel::Low),
            "medium" => Ok(StressLevel::Medium),
            "high" => Ok(StressLevel::High),
            other => Err(Error::Config(format!("unknown stress level {other:?}"))),
        }
    }
}

/// Operator condition for a discrete stress level.
pub fn discrete_stress_to_condition(level: StressLevel) -> f64 {
    match level {
        StressLevel::Low => 0.75,
        StressLevel::Medium => 0.5,
        StressLevel::High => 0.25,
    }
}

/// One output of an upstream stress detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StressSample {
    /// Binary detector output: stressed or not.
    Binary(bool),
    Level(StressLevel),
}

impl StressSample {
    /// Stress intensity in [0, 1]; discrete levels map to one minus their
    /// condition value.
    pub fn intensity(self) -> f64 {
        match self {
            StressSample::Binary(true) => 1.0,
            StressSample::Binary(false) => 0.0,
            StressSample::Level(level) => 1.0 - discrete_stress_to_condition(level),
        }
    }
}

impl FromStr for StressSample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(StressSample::Binary(false)),
            "1" => Ok(StressSample::Binary(true)),
            other => other.parse().map(StressSample::Level),
        }
    }
}

/// Uniformly sampled stress detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct StressTrace {
    times: Vec<f64>,
    samples: Vec<StressSample>,
    sample_period: f64,
    // prefix[i] = sum of the first i intensities
    prefix: Vec<f64>,
}

impl StressTrace {
    pub fn new(samples: Vec<(f64, StressSample)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let times: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
        let sample_period = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        for pair in times.windows(2) {
            let dt = pair[1] - pair[0];
            if !(dt > 0.0) {
                return Err(Error::Config(format!(
                    "stress trace timestamps must increase strictly ({} then {})",
                    pair[0], pair[1]
                )));
            }
            if (dt - sample_period).abs() > 1e-6 * sample_period.max(1.0) {
                return Err(Error::Config(format!(
                    "stress trace is not uniformly sampled ({dt} s vs {sample_period} s)"
                )));
            }
        }
        let samples: Vec<StressSample> = samples.into_iter().map(|(_, s)| s).collect();
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for s in &samples {
            acc += s.intensity();
            prefix.push(acc);
        }
        Ok(StressTrace {
            times,
            samples,
            sample_period,
            prefix,
        })
    }

    /// Binary samples at `period` spacing starting at t = 0.
    pub fn from_binary(period: f64, values: &[u8]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 * period, StressSample::Binary(*v != 0)))
                .collect(),
        )
    }

    /// Reads a `time_s,stress` CSV; stress is `0`/`1` or `low`/`medium`/`high`.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time_s: f64,
            stress: String,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            samples.push((row.time_s, row.stress.parse()?));
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    /// Number of samples with timestamp at or before `t`.
    fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t)
    }
}

/// `1 − s̄(t)`, with `s̄(t)` the mean stress over the last `window` samples
/// at or before `t` (fewer near the start of the trace). Past the end of the
/// trace the last window is held.
pub fn stress_to_condition(trace: &StressTrace, window: usize, t: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if window == 0 {
        return Err(Error::Config(
            "moving-average window must be at least 1".into(),
        ));
    }
    let end = trace.count_until(t);
    if end == 0 {
        return Err(Error::OutOfSpan {
            t,
            start: trace.start(),
        });
    }
    let begin = end.saturating_sub(window);
    let mean = (trace.prefix[end] - trace.prefix[begin]) / (end - begin) as f64;
    Ok((1.0 - mean).clamp(0.0, 1.0))
}

/// Step-hold `time_s,value` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTrace {
    rows: Vec<(f64, f64)>,
}

impl ScriptedTrace {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(pair) = rows.windows(2).find(|p| !(p[1].0 > p[0].0)) {
            return Err(Error::Config(format!(
                "scripted trace timestamps must increase strictly ({} then {})",
                pair[0].0, pair[1].0
            )));
        }
        Ok(ScriptedTrace { rows })
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            time_s: f64,
            value: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows = rdr
            .deserialize()
            .map(|r| r.map(|row: Row| (row.time_s, row.value)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    /// Value of the last row at or before `t`; `None` before the first row.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let n = self.rows.partition_point(|(s, _)| *s <= t);
        n.checked_sub(1).map(|i| self.rows[i].1)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|(_, v)| *v)
    }
}

/// Patrolling performance from cross-track error.
///
/// `e` is the mean distance of the recent path to the reference perimeter.
/// Within the margin ψ the performance is 1; beyond it falls linearly and
/// reaches 0 at `e = 2ψ`.
pub fn crosstrack_performance(path: &[Point], reference: &Rect, margin: f64) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Config(
            "cross-track window holds no path points".into(),
        ));
    }
    if !(margin > 0.0) {
        return Err(Error::Config(format!(
            "cross-track margin must be positive, got {margin}"
        )));
    }
    if reference.is_empty() || perimeter(reference)? == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let mut total = 0.0;
    for p in path {
        total += boundary_distance(*p, reference)?;
    }
    let e = total / path.len() as f64;
    if e <= margin {
        Ok(1.0)
    } else {
        Ok((1.0 - (e - margin) / margin).max(0.0))
    }
}

/// What a provider measures and where its raw values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderKind {
    /// Operator condition from a stress detector trace.
    HumanStress { trace: StressTrace, window: usize },
    /// Raw robot health readings, normalized through the provider bounds.
    RobotHealthTrace { trace: ScriptedTrace },
    /// Performance from cross-track error against the robot's region.
    PerformanceCrosstrack { margin: f64 },
    /// Pre-normalized step-hold values.
    Scripted { trace: ScriptedTrace },
}

/// A per-agent metric source with its own update period.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionProvider {
    pub label: String,
    pub kind: ProviderKind,
    pub cycle_time: f64,
    pub bounds: MetricBounds,
}

/// Recent path and reference region, for cross-track providers.
#[derive(Debug, Clone, Copy)]
pub struct TrackContext<'a> {
    pub path: &'a [Point],
    pub region: &'a Rect,
}

impl ConditionProvider {
    pub fn new(
        label: impl Into<String>,
        kind: ProviderKind,
        cycle_time: f64,
        bounds: MetricBounds,
    ) -> Result<Self> {
        let label = label.into();
        if !(cycle_time > 0.0) {
            return Err(Error::Config(format!(
                "provider {label}: cycle time must be positive, got {cycle_time}"
            )));
        }
        if let ProviderKind::RobotHealthTrace { trace } | ProviderKind::Scripted { trace } = &kind {
            for v in trace.values() {
                bounds.normalize(v, &label)?;
            }
        }
        Ok(ConditionProvider {
            label,
            kind,
            cycle_time,
            bounds,
        })
    }

    /// Normalized value at provider-local time `t`.
    ///
    /// Returns `None` when the provider has nothing to say yet (before the
    /// first scripted row, or a cross-track provider with no track).
    pub fn sample(&self, t: f64, track: Option<TrackContext<'_>>) -> Result<Option<f64>> {
        match &self.kind {
            ProviderKind::HumanStress { trace, window } => {
                if t < trace.start() {
                    return Ok(None);
                }
                stress_to_condition(trace, *window, t).map(Some)
            }
            ProviderKind::RobotHealthTrace { trace } | ProviderKind::Scripted { trace } => trace
                .value_at(t)
                .map(|raw| self.bounds.normalize(raw, &self.label))
                .transpose(),
            ProviderKind::PerformanceCrosstrack { margin } => match track {
                Some(ctx) if !ctx.path.is_empty() && !ctx.region.is_empty() => {
                    crosstrack_performance(ctx.path, ctx.region, *margin).map(Some)
                }
                _ => Ok(None),
            },
        }
    }
}
