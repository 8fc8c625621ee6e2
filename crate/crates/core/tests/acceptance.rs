//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `MHMR_LONG_RUN=1` to include the m = 500 scalability run.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use mhmr_core::geometry::{boundary_distance, Point, Rect};
use mhmr_core::metrics::{
    discrete_stress_to_condition, stress_to_condition, StressLevel, StressSample, StressTrace,
};
use mhmr_core::scenario::{
    builtin, run_scenario, MetricKind, Profile, RunRecord, ScenarioScript, ScriptEvent,
};
use mhmr_core::transition::{step_transition, transition_coefficient};
use mhmr_core::{
    propose_allocation, ConditionSnapshot, Error, OperatorId, RobotId, TeamTopology, WorkloadVector,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, u64, Box<dyn Fn() -> Verdict>);

enum Verdict {
    Pass(String),
    Fail(String),
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn main() {
    let long_run = std::env::var("MHMR_LONG_RUN").is_ok_and(|v| v == "1");
    let criteria: Vec<Criterion> = vec![
        (
            "AC1",
            "uniform baseline",
            1,
            Box::new(|| wrap(ac1_uniform_baseline())),
        ),
        (
            "AC2",
            "zero-gating",
            10,
            Box::new(|| wrap(ac2_zero_gating())),
        ),
        (
            "AC3",
            "S3 equilibrium",
            5,
            Box::new(|| wrap(ac3_s3_equilibrium())),
        ),
        ("AC4", "S4 failure", 5, Box::new(|| wrap(ac4_s4_failure()))),
        (
            "AC5",
            "transition conservation and decay",
            10,
            Box::new(|| wrap(ac5_conservation())),
        ),
        ("AC6", "K-ordering", 30, Box::new(|| wrap(ac6_k_ordering()))),
        (
            "AC7",
            "m-scalability",
            300,
            Box::new(move || ac7_scalability(long_run)),
        ),
        (
            "AC8",
            "patrol velocity model",
            60,
            Box::new(|| wrap(ac8_patrol())),
        ),
        (
            "AC9",
            "geometry oracle",
            5,
            Box::new(|| wrap(ac9_geometry())),
        ),
        (
            "AC10",
            "stress pipeline",
            1,
            Box::new(|| wrap(ac10_stress())),
        ),
        (
            "AC11",
            "replay determinism",
            10,
            Box::new(|| wrap(ac11_replay())),
        ),
    ];

    let mut failures = 0;
    for (id, name, budget_s, run) in criteria {
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let verdict = match verdict {
            Verdict::Pass(_) if elapsed > Duration::from_secs(budget_s) => {
                Verdict::Fail(format!("over the {budget_s} s budget"))
            }
            v => v,
        };
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] {id} {name} ({:.2} s): {detail}",
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn wrap(o: Outcome) -> Verdict {
    match o {
        Ok(d) => Verdict::Pass(d),
        Err(d) => Verdict::Fail(d),
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn ac1_uniform_baseline() -> Outcome {
    let mut worst = 0.0_f64;
    for m in [2, 3, 10] {
        for topology in [TeamTopology::autonomous(m), TeamTopology::odd_operated(m)] {
            let p = propose_allocation(&topology, &ConditionSnapshot::healthy(&topology))
                .map_err(err)?;
            for s in &p.shares {
                worst = worst.max((s - 1.0 / m as f64).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation from 1/m {worst:e}"))
}

#[derive(Debug, Clone, Copy)]
enum Role {
    RobotCondition,
    OperatorCondition,
    Performance,
}

fn ac2_zero_gating() -> Outcome {
    let strategy = (1usize..=20, 0usize..=10).prop_flat_map(|(m, h)| {
        let edges = if h == 0 {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec((1..=m, 1..=h), 0..=3 * m).boxed()
        };
        (
            Just(m),
            Just(h),
            edges,
            prop::collection::vec(0.01f64..=1.0, 2 * m + h),
            any::<prop::sample::Index>(),
            prop_oneof![
                Just(Role::RobotCondition),
                Just(Role::OperatorCondition),
                Just(Role::Performance)
            ],
        )
    });
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let gated = std::cell::Cell::new(0usize);
    runner
        .run(&strategy, |(m, h, edges, values, pick, role)| {
            let topology = TeamTopology::new(
                (1..=m).map(RobotId).collect(),
                (1..=h).map(OperatorId).collect(),
                edges.iter().map(|(r, o)| (RobotId(*r), OperatorId(*o))),
            )
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut snap = ConditionSnapshot::healthy(&topology);
            for (i, r) in topology.robot_ids().iter().enumerate() {
                snap = snap
                    .with_robot_condition(*r, values[2 * i])
                    .with_robot_performance(*r, values[2 * i + 1]);
            }
            for (j, o) in topology.operator_ids().iter().enumerate() {
                snap = snap.with_operator_condition(*o, values[2 * m + j]);
            }
            let i = pick.index(m);
            let robot = RobotId(i + 1);
            let mut expect_zero = vec![i];
            match role {
                Role::RobotCondition => snap = snap.with_robot_condition(robot, 0.0),
                Role::Performance => snap = snap.with_robot_performance(robot, 0.0),
                Role::OperatorCondition => {
                    let ops = topology.operators_at(i);
                    let Some(op) = ops.first().copied() else {
                        // autonomous robot: no operator to gate on
                        return Ok(());
                    };
                    snap = snap.with_operator_condition(op, 0.0);
                    expect_zero = (0..m)
                        .filter(|k| topology.operators_at(*k).contains(&op))
                        .collect();
                }
            }
            match propose_allocation(&topology, &snap) {
                Ok(p) => {
                    for k in &expect_zero {
                        prop_assert_eq!(p.shares[*k], 0.0, "robot index {} under {:?}", k, role);
                    }
                    prop_assert!((p.total() - 1.0).abs() < 1e-12);
                }
                Err(Error::NoCapableAgent) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
            gated.set(gated.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "1000 random teams, {} with a gated agent, all gated shares exactly 0",
        gated.get()
    ))
}

/// σ′ for the S3/S4 team given robot R3's condition.
fn oracle(r3: f64) -> Vec<f64> {
    let mut s = [1.0; 10];
    s[2] = 0.8_f64.min(r3) * ((0.8 + r3 + 1.0) / 3.0);
    s[4] = 0.8 * ((0.8 + 1.0 + 1.0) / 3.0);
    s[7] = 0.75 * ((0.75 + 1.0) / 2.0);
    let total: f64 = s.iter().sum();
    s.iter().map(|x| x / total).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn ac3_s3_equilibrium() -> Outcome {
    let expected = oracle(0.6);
    let quoted = [(2, 0.054036), (4, 0.084056), (7, 0.073878), (0, 0.112576)];
    for (i, q) in quoted {
        check(
            (expected[i] - q).abs() < 1e-6,
            format!("oracle {i} = {} vs quoted {q}", expected[i]),
        )?;
    }
    let rec = run_scenario(&builtin::s3()).map_err(err)?;
    let t = rec.summary.convergence_time_s.ok_or("did not converge")?;
    let gap = max_gap(&rec.summary.final_sigma, &expected);
    check(gap <= 1e-6, format!("final σ off the oracle by {gap:e}"))?;
    Ok(format!("converged at {t} s, max |σ − oracle| {gap:e}"))
}

fn ac4_s4_failure() -> Outcome {
    let rec = run_scenario(&builtin::s4()).map_err(err)?;
    let sigma = &rec.summary.final_sigma;
    check(
        sigma[2] == 0.0,
        format!("σ_3 = {:e}, not exactly 0", sigma[2]),
    )?;
    let gap = max_gap(sigma, &oracle(0.0));
    check(gap <= 1e-6, format!("survivors off the oracle by {gap:e}"))?;
    let mut worst = rec.summary.max_sum_deviation;
    for row in &rec.cycles {
        let total: f64 = mhmr_core::compensated_sum(row.sigma.iter().copied());
        worst = worst.max((total - 1.0).abs());
    }
    check(worst <= 1e-9, format!("|Σσ − 1| reached {worst:e}"))?;
    Ok(format!(
        "σ_3 = 0, survivors within {gap:e}, max |Σσ − 1| {worst:e} over {} cycles",
        rec.cycles.len()
    ))
}

fn ac5_conservation() -> Outcome {
    let m = 10;
    let mut runner = TestRunner::deterministic();
    let simplex = prop::collection::vec(0.0f64..1.0, m).prop_map(|w| {
        let t: f64 = w.iter().sum::<f64>().max(1e-9);
        w.into_iter().map(|x| x / t).collect::<Vec<_>>()
    });
    let mut sigma = WorkloadVector::uniform(m);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let before = sigma.total();
        let target = simplex.new_tree(&mut runner).unwrap().current();
        let k_e = (0.0f64..1.0).new_tree(&mut runner).unwrap().current();
        sigma = step_transition(&sigma, &WorkloadVector::new(target, 0), k_e).map_err(err)?;
        worst = worst.max((sigma.total() - before).abs());
    }
    check(worst <= 1e-12, format!("per-step drift {worst:e}"))?;

    let target = WorkloadVector::new(vec![0.05, 0.1, 0.15, 0.2, 0.5], 0);
    let mut s = WorkloadVector::uniform(5);
    let e0 = s.l1_distance(&target);
    let k_e = transition_coefficient(0.25, 3.0);
    let mut decay_gap = 0.0_f64;
    for n in 1..=200 {
        s = step_transition(&s, &target, k_e).map_err(err)?;
        decay_gap = decay_gap.max((s.l1_distance(&target) - e0 * (1.0 - k_e).powi(n)).abs());
    }
    check(
        decay_gap <= 1e-9,
        format!("decay off closed form by {decay_gap:e}"),
    )?;
    Ok(format!(
        "max per-step drift {worst:e}, decay gap {decay_gap:e}"
    ))
}

fn with_robots(m: usize) -> ScenarioScript {
    builtin::s3()
        .with_overrides(&[format!("topology.robots={m}")])
        .expect("s3 has a topology.robots field")
}

fn ac6_k_ordering() -> Outcome {
    let mut times = Vec::new();
    for k in [1.0, 3.0, 5.0, 10.0] {
        let mut s = with_robots(50);
        s.params.k = k;
        s.params.stop_on_convergence = true;
        let rec = run_scenario(&s).map_err(err)?;
        times.push(
            rec.summary
                .convergence_time_s
                .ok_or(format!("K = {k} did not converge"))?,
        );
    }
    check(
        times.windows(2).all(|w| w[0] > w[1]),
        format!("times {times:?} not strictly decreasing"),
    )?;
    Ok(format!(
        "convergence times for K = 1, 3, 5, 10: {times:?} s"
    ))
}

fn ac7_scalability(long_run: bool) -> Verdict {
    let mut sizes = vec![20, 50, 100];
    if long_run {
        sizes.push(500);
    }
    let mut errors = Vec::new();
    let mut times = Vec::new();
    for m in &sizes {
        let mut s = with_robots(*m);
        s.params.stop_on_convergence = true;
        s.params.record_every = 100;
        s.duration_s = if *m >= 500 { 8000.0 } else { 2000.0 };
        let rec = match run_scenario(&s) {
            Ok(r) => r,
            Err(e) => return Verdict::Fail(e.to_string()),
        };
        let (Some(e0), Some(t)) = (rec.summary.initial_error, rec.summary.convergence_time_s)
        else {
            return Verdict::Fail(format!("m = {m} did not converge"));
        };
        errors.push(e0);
        times.push(t);
    }
    if !errors.windows(2).all(|w| w[0] > w[1]) {
        return Verdict::Fail(format!("initial errors {errors:?} not strictly decreasing"));
    }
    let detail = format!("m = {sizes:?}: initial errors {errors:?}, convergence times {times:?} s");
    if long_run {
        Verdict::Pass(detail)
    } else {
        Verdict::Pass(format!("{detail} (m = 500 skipped; set MHMR_LONG_RUN=1)"))
    }
}

fn drop_script(allocation: bool) -> ScenarioScript {
    let mut s = builtin::s1();
    s.name = if allocation {
        "drop"
    } else {
        "drop_no_allocation"
    }
    .into();
    s.params.allocation = allocation;
    s.events = vec![ScriptEvent::Condition {
        time_s: builtin::S1_EVENT_TIMES[0],
        target: 1,
        metric: MetricKind::OperatorCondition,
        profile: Profile::Step { value: 0.5 },
        cycle_time_s: None,
    }];
    s
}

fn ac8_patrol() -> Outcome {
    let band = 10.0;
    let mut healthy = builtin::s1();
    healthy.events.clear();
    let rec = run_scenario(&healthy).map_err(err)?;
    check(rec.laps.len() >= 3, "too few healthy laps")?;
    let worst = rec
        .laps
        .iter()
        .map(|l| (l.lap_time_s - 65.0).abs())
        .fold(0.0, f64::max);
    check(worst <= band, format!("healthy lap off τ* by {worst} s"))?;

    let drop_at = builtin::S1_EVENT_TIMES[0];
    let with = run_scenario(&drop_script(true)).map_err(err)?;
    let without = run_scenario(&drop_script(false)).map_err(err)?;
    let slow: Vec<f64> = without
        .laps_of(RobotId(1))
        .filter(|l| l.completed_at_s - l.lap_time_s >= drop_at - 1e-6)
        .map(|l| l.lap_time_s)
        .collect();
    check(!slow.is_empty(), "no R1 lap started after the drop")?;
    check(
        slow.iter().all(|t| *t > 65.0 + band),
        format!("R1 laps after the drop {slow:?} within the band"),
    )?;

    let compared = compare_laps(&with, &without, drop_at)?;
    Ok(format!(
        "healthy laps within {worst:.3} s of τ*, R1 unallocated lap {:.1} s, T_L with ≤ without on {compared} laps",
        slow[0]
    ))
}

fn compare_laps(with: &RunRecord, without: &RunRecord, after: f64) -> Result<usize, String> {
    let mut compared = 0;
    for lap in &with.summary.patrol_laps {
        let (Some(a), Some(b)) = (lap.t_l_s, without.patrol_time(lap.lap)) else {
            continue;
        };
        let finished = with
            .laps
            .iter()
            .filter(|l| l.lap == lap.lap)
            .map(|l| l.completed_at_s)
            .fold(0.0, f64::max);
        if finished > after + 1e-6 {
            check(
                a <= b + 1e-9,
                format!("lap {}: T_L {a:.2} s with vs {b:.2} s without", lap.lap),
            )?;
            compared += 1;
        }
    }
    check(compared > 0, "no completed laps after the drop")?;
    Ok(compared)
}

/// Distance to the perimeter by sampling each edge, then refining around
/// the best sample (distance along an edge is convex).
fn sampled_boundary_distance(p: Point, r: &Rect) -> f64 {
    let n = 1000;
    let mut best = f64::INFINITY;
    for (a, b) in r.edges() {
        let at = |t: f64| Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let (mut k_best, mut d_best) = (0usize, f64::INFINITY);
        for k in 0..=n {
            let d = p.distance(at(k as f64 / n as f64));
            if d < d_best {
                (k_best, d_best) = (k, d);
            }
        }
        let mut lo = (k_best.saturating_sub(1)) as f64 / n as f64;
        let mut hi = ((k_best + 1).min(n)) as f64 / n as f64;
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if p.distance(at(m1)) < p.distance(at(m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.min(d_best).min(p.distance(at(0.5 * (lo + hi))));
    }
    best
}

fn ac9_geometry() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let strategy = (
        -20.0f64..20.0,
        -20.0f64..20.0,
        0.01f64..15.0,
        0.01f64..15.0,
        -30.0f64..40.0,
        -30.0f64..40.0,
    );
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let (x, y, w, h, px, py) = strategy.new_tree(&mut runner).unwrap().current();
        let r = Rect::from_origin(Point::new(x, y), w, h);
        let p = Point::new(px, py);
        let exact = boundary_distance(p, &r).map_err(err)?;
        worst = worst.max((exact - sampled_boundary_distance(p, &r)).abs());
    }
    check(worst < 1e-6, format!("max abs error {worst:e} m"))?;
    Ok(format!(
        "1000 rectangle/point pairs, max abs error {worst:e} m"
    ))
}

fn ac10_stress() -> Outcome {
    let window = 30;
    let ones = StressTrace::from_binary(1.0, &[1; 100]).map_err(err)?;
    let zeros = StressTrace::from_binary(1.0, &[0; 100]).map_err(err)?;
    for t in (window - 1)..100 {
        let t = t as f64;
        check(
            stress_to_condition(&ones, window, t).map_err(err)? == 0.0,
            "constant stress not 0",
        )?;
        check(
            stress_to_condition(&zeros, window, t).map_err(err)? == 1.0,
            "no stress not 1",
        )?;
    }
    let levels = [
        (StressLevel::Low, 0.75),
        (StressLevel::Medium, 0.5),
        (StressLevel::High, 0.25),
    ];
    for (level, expected) in levels {
        check(
            discrete_stress_to_condition(level) == expected,
            format!("{level:?} maps wrong"),
        )?;
        let trace = StressTrace::new(
            (0..40)
                .map(|i| (i as f64, StressSample::Level(level)))
                .collect(),
        )
        .map_err(err)?;
        let c = stress_to_condition(&trace, window, 39.0).map_err(err)?;
        check(
            (c - expected).abs() < 1e-12,
            format!("{level:?} trace gives {c}"),
        )?;
    }
    Ok("constant 1 → 0, constant 0 → 1, low/medium/high → 0.75/0.5/0.25".into())
}

fn ac11_replay() -> Outcome {
    for s in builtin::all() {
        let a = run_scenario(&s).map_err(err)?.cycles_csv().map_err(err)?;
        let b = run_scenario(&s).map_err(err)?.cycles_csv().map_err(err)?;
        check(a == b, format!("{} replay differs", s.name))?;
    }
    Ok(format!(
        "{} bundled scripts replay byte-identical",
        builtin::all().len()
    ))
}
