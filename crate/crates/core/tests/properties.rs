use proptest::prelude::*;
use proptest::strategy::ValueTree;

use mhmr_core::geometry::{boundary_distance, Point, Rect};
use mhmr_core::metrics::{stress_to_condition, MetricBounds, StressTrace};
use mhmr_core::partition::{partition_from_workload, GlobalWorkspace};
use mhmr_core::transition::{step_transition, transition_coefficient};
use mhmr_core::{
    propose_allocation, ConditionSnapshot, OperatorId, RobotId, TeamTopology, WorkloadVector,
};

/// Random team: robot count, operator count, and edges as (robot, operator) indices.
fn team() -> impl Strategy<Value = TeamTopology> {
    (1usize..=12, 0usize..=6).prop_flat_map(|(m, h)| {
        let edges = if h == 0 {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec((1..=m, 1..=h), 0..=2 * m).boxed()
        };
        edges.prop_map(move |edges| {
            TeamTopology::new(
                (1..=m).map(RobotId).collect(),
                (1..=h).map(OperatorId).collect(),
                edges.into_iter().map(|(r, o)| (RobotId(r), OperatorId(o))),
            )
            .unwrap()
        })
    })
}

fn snapshot_for(topology: &TeamTopology, values: &[f64]) -> ConditionSnapshot {
    let mut v = values.iter().copied().cycle();
    let mut snap = ConditionSnapshot::healthy(topology);
    for r in topology.robot_ids() {
        snap = snap
            .with_robot_condition(*r, v.next().unwrap())
            .with_robot_performance(*r, v.next().unwrap());
    }
    for o in topology.operator_ids() {
        snap = snap.with_operator_condition(*o, v.next().unwrap());
    }
    snap
}

fn unit_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..=1.0, 40)
}

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_filter_map("all zero", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| w.iter().map(|x| x / total).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn proposal_is_a_distribution(topology in team(), values in unit_values()) {
        let snap = snapshot_for(&topology, &values);
        let p = propose_allocation(&topology, &snap).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-12);
        prop_assert!(p.shares.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn zero_robot_condition_gets_nothing(topology in team(), values in unit_values(), pick in any::<prop::sample::Index>()) {
        let robot = topology.robot_ids()[pick.index(topology.robot_count())];
        let snap = snapshot_for(&topology, &values).with_robot_condition(robot, 0.0);
        if let Ok(p) = propose_allocation(&topology, &snap) {
            prop_assert_eq!(p.shares[topology.robot_index(robot).unwrap()], 0.0);
        }
    }

    #[test]
    fn lowering_condition_never_raises_share(topology in team(), values in unit_values(), pick in any::<prop::sample::Index>(), factor in 0.0f64..1.0) {
        let i = pick.index(topology.robot_count());
        let robot = topology.robot_ids()[i];
        let snap = snapshot_for(&topology, &values);
        let before = propose_allocation(&topology, &snap).unwrap().shares[i];
        let lowered = snap.robot_condition_of(robot).unwrap() * factor;
        if let Ok(after) = propose_allocation(&topology, &snap.clone().with_robot_condition(robot, lowered)) {
            prop_assert!(after.shares[i] <= before + 1e-12);
        }
    }

    #[test]
    fn identical_robots_get_identical_shares(m in 1usize..=20, c in 0.05f64..=1.0, p in 0.05f64..=1.0) {
        let topology = TeamTopology::autonomous(m);
        let mut snap = ConditionSnapshot::healthy(&topology);
        for r in topology.robot_ids() {
            snap = snap.with_robot_condition(*r, c).with_robot_performance(*r, p);
        }
        let w = propose_allocation(&topology, &snap).unwrap();
        for s in &w.shares {
            prop_assert!((s - 1.0 / m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn step_stays_between_current_and_proposed(
        (a, b) in (2usize..=15).prop_flat_map(|m| (simplex(m), simplex(m))),
        k_e in 0.0f64..1.0,
    ) {
        let cur = WorkloadVector::new(a.clone(), 0);
        let prop = WorkloadVector::new(b.clone(), 0);
        let next = step_transition(&cur, &prop, k_e).unwrap();
        prop_assert!((next.total() - 1.0).abs() < 1e-12);
        for ((x, y), z) in a.iter().zip(&b).zip(&next.shares) {
            prop_assert!(*z >= x.min(*y) - 1e-15 && *z <= x.max(*y) + 1e-15);
        }
        prop_assert!(next.l1_distance(&prop) <= cur.l1_distance(&prop) + 1e-15);
    }

    #[test]
    fn larger_k_moves_further(q in 1e-3f64..10.0, k1 in 0.1f64..10.0, dk in 0.01f64..5.0) {
        let low = transition_coefficient(q, k1);
        let high = transition_coefficient(q, k1 + dk);
        // saturates to exactly 1 in f64 once K·q is large
        prop_assert!(low < high || (low == 1.0 && high == 1.0));
        prop_assert!((0.0..=1.0).contains(&low));
    }

    #[test]
    fn partition_areas_match_workload(sigma in (1usize..=12).prop_flat_map(simplex), w in 1.0f64..50.0, h in 0.5f64..20.0) {
        let ws = GlobalWorkspace::new(Point::new(-3.0, 2.0), w, h, 0.0).unwrap();
        let part = partition_from_workload(&ws, &WorkloadVector::new(sigma.clone(), 0)).unwrap();
        for (f, s) in part.area_fractions().iter().zip(&sigma) {
            prop_assert!((f - s).abs() < 1e-9);
        }
        let bounds = ws.bounds();
        for pair in part.regions.windows(2) {
            prop_assert!(pair[0].max.x <= pair[1].min.x + 1e-9);
        }
        for r in &part.regions {
            prop_assert!(r.min.x >= bounds.min.x - 1e-9 && r.max.x <= bounds.max.x + 1e-9);
        }
    }

    #[test]
    fn gapped_partition_keeps_clearance(sigma in (2usize..=8).prop_flat_map(simplex), gap in 0.0f64..0.5) {
        let ws = GlobalWorkspace::new(Point::new(0.0, 0.0), 20.0, 5.0, gap).unwrap();
        let part = partition_from_workload(&ws, &WorkloadVector::new(sigma, 0)).unwrap();
        let occupied: Vec<&Rect> = part.regions.iter().filter(|r| !r.is_empty()).collect();
        for pair in occupied.windows(2) {
            prop_assert!(pair[1].min.x - pair[0].max.x >= gap - 1e-9);
        }
    }

    #[test]
    fn boundary_distance_matches_sampling(
        x0 in -10.0f64..10.0, y0 in -10.0f64..10.0, w in 0.1f64..10.0, h in 0.1f64..10.0,
        px in -15.0f64..25.0, py in -15.0f64..25.0,
    ) {
        let r = Rect::from_origin(Point::new(x0, y0), w, h);
        let p = Point::new(px, py);
        let exact = boundary_distance(p, &r).unwrap();
        let mut sampled = f64::INFINITY;
        for (a, b) in r.edges() {
            let n = 400;
            for i in 0..=n {
                let t = i as f64 / n as f64;
                let q = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
                sampled = sampled.min(p.distance(q));
            }
        }
        prop_assert!(exact <= sampled + 1e-9);
        prop_assert!(sampled - exact <= 10.0 / 400.0);
    }

    #[test]
    fn normalized_metrics_are_in_unit_range(lo in -100.0f64..100.0, span in 0.01f64..100.0, f in 0.0f64..=1.0) {
        let b = MetricBounds::new(lo, lo + span).unwrap();
        let v = b.normalize(lo + f * span, "m").unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(b.normalize(lo + span * 1.5, "m").is_err());
    }

    #[test]
    fn stress_condition_is_window_lipschitz(bits in prop::collection::vec(0u8..=1, 40..120), window in 1usize..=30) {
        let trace = StressTrace::from_binary(1.0, &bits).unwrap();
        let mut prev: Option<f64> = None;
        for i in window - 1..bits.len() {
            let c = stress_to_condition(&trace, window, i as f64).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            if let Some(p) = prev {
                prop_assert!((c - p).abs() <= 1.0 / window as f64 + 1e-12);
            }
            prev = Some(c);
        }
    }
}

#[test]
fn conservation_over_many_random_steps() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let m = 12;
    let mut sigma = WorkloadVector::uniform(m);
    for _ in 0..10_000 {
        let target = simplex(m).new_tree(&mut runner).unwrap().current();
        let k_e = (0.0f64..1.0).new_tree(&mut runner).unwrap().current();
        sigma = step_transition(&sigma, &WorkloadVector::new(target, 0), k_e).unwrap();
        assert!((sigma.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn frozen_target_decays_geometrically() {
    let target = WorkloadVector::new(vec![0.1, 0.2, 0.3, 0.4], 0);
    let mut sigma = WorkloadVector::uniform(4);
    let e0 = sigma.l1_distance(&target);
    let k_e = transition_coefficient(0.3, 2.0);
    for n in 1..=60 {
        sigma = step_transition(&sigma, &target, k_e).unwrap();
        let expected = e0 * (1.0 - k_e).powi(n);
        assert!((sigma.l1_distance(&target) - expected).abs() < 1e-9);
    }
}
