use asmplan::backend::scripted::{ScriptedProposer, ScriptedReflector};
use asmplan::evalharness::lbr_percent;
use asmplan::linebalance::{
    evaluate, precedence_violations, solve_baseline, solve_oracle, solve_reflective, BalanceInstance, BalanceReport,
    BalanceTask, Constraints,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// Durations and predecessor index lists; predecessors always point at
/// earlier indices so the graph is acyclic.
type Dag = (Vec<u32>, Vec<Vec<usize>>);

fn dag() -> impl Strategy<Value = Dag> {
    (1..=10usize).prop_flat_map(|n| {
        let durations = prop::collection::vec(1..=60u32, n);
        let preds = (0..n)
            .map(|i| prop::collection::vec(prop::bool::weighted(0.3), i))
            .collect::<Vec<_>>()
            .prop_map(|masks| {
                masks
                    .into_iter()
                    .map(|mask| mask.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect())
                    .collect()
            });
        (durations, preds)
    })
}

fn instance((durations, preds): &Dag, m: usize, ct_limit: Option<f64>) -> BalanceInstance {
    let tasks = durations
        .iter()
        .enumerate()
        .map(|(i, &d)| BalanceTask::new(format!("t{i}"), d as f64, preds[i].iter().map(|j| format!("t{j}"))))
        .collect();
    BalanceInstance::new(tasks, m, ct_limit).unwrap()
}

/// Exhaustive minimum cycle time: every station vector in which no task sits
/// before one of its predecessors.
fn brute_force_ct((durations, preds): &Dag, m: usize) -> f64 {
    fn go(
        i: usize,
        durations: &[u32],
        preds: &[Vec<usize>],
        station: &mut Vec<usize>,
        loads: &mut [u32],
        best: &mut u32,
    ) {
        let ct = *loads.iter().max().unwrap();
        if ct >= *best {
            return;
        }
        if i == durations.len() {
            *best = ct;
            return;
        }
        let lo = preds[i].iter().map(|&p| station[p]).max().unwrap_or(0);
        for s in lo..loads.len() {
            loads[s] += durations[i];
            station.push(s);
            go(i + 1, durations, preds, station, loads, best);
            station.pop();
            loads[s] -= durations[i];
        }
    }
    let mut best = u32::MAX;
    go(0, durations, preds, &mut Vec::new(), &mut vec![0; m], &mut best);
    best as f64
}

fn check_report(inst: &BalanceInstance, r: &BalanceReport) {
    let total: f64 = r.loads.iter().sum();
    assert!((total - inst.total_work()).abs() < 1e-9);
    assert!((r.lbr / 100.0 * r.stations as f64 * r.ct - total).abs() < 1e-9);
    assert!((r.lbr - lbr_percent(inst.total_work(), inst.stations(), r.ct)).abs() < 1e-9);
    assert_eq!(r.nwu, r.loads.iter().filter(|&&l| l > 0.0).count());
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

#[test]
fn solvers_never_beat_the_exhaustive_optimum() {
    let cases = (dag(), 1..=4usize, 0u64..1000, 0.0..0.4f64);
    runner(256)
        .run(&cases, |(g, m, seed, slack)| {
            let best = brute_force_ct(&g, m);
            let inst = instance(&g, m, Some((best * (1.0 + slack)).floor() + 1.0));

            let oracle = solve_oracle(&inst).unwrap();
            prop_assert_eq!(oracle.report.ct, best);
            prop_assert!(oracle.report.feasible);

            let baseline = solve_baseline(&inst, seed, 500).unwrap();
            prop_assert!(baseline.report.ct >= oracle.report.ct);

            let reflective = solve_reflective(
                &inst,
                &mut ScriptedProposer,
                &mut ScriptedReflector,
                20,
                Constraints::for_instance(&inst),
            )
            .unwrap();
            prop_assert!(reflective.report.ct >= oracle.report.ct);

            for (a, r) in [
                (&oracle.assignment, &oracle.report),
                (&baseline.assignment, &baseline.report),
                (&reflective.assignment, &reflective.report),
            ] {
                prop_assert!(precedence_violations(inst.tasks(), a).is_empty());
                prop_assert_eq!(&evaluate(&inst, a).unwrap().loads, &r.loads);
                check_report(&inst, r);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn baseline_is_reproducible_per_seed() {
    runner(64)
        .run(&(dag(), 1..=4usize, any::<u64>()), |(g, m, seed)| {
            let inst = instance(&g, m, None);
            let a = solve_baseline(&inst, seed, 300).unwrap();
            let b = solve_baseline(&inst, seed, 300).unwrap();
            prop_assert_eq!(a.assignment, b.assignment);
            prop_assert_eq!(a.report, b.report);
            Ok(())
        })
        .unwrap();
}

proptest! {
    #[test]
    fn oracle_ct_respects_lower_bound(g in dag(), m in 1..=4usize) {
        let inst = instance(&g, m, None);
        let r = solve_oracle(&inst).unwrap();
        prop_assert!(r.report.ct >= inst.lower_bound_ct());
        prop_assert!(r.report.ct <= inst.total_work());
        prop_assert_eq!(r.assignment.task_count(), inst.len());
    }

    #[test]
    fn validator_flags_reversed_edges(g in dag(), m in 2..=4usize) {
        let inst = instance(&g, m, None);
        let mut a = solve_oracle(&inst).unwrap().assignment;
        // Reversing every station's order and the station order breaks each edge.
        a.stations.reverse();
        for s in &mut a.stations {
            s.reverse();
        }
        let edges: usize = g.1.iter().map(Vec::len).sum();
        prop_assert_eq!(precedence_violations(inst.tasks(), &a).len(), edges);
    }
}
