use std::path::{Path, PathBuf};
use std::time::Instant;

use asmplan::kgraph::{KnowledgeGraph, ProcessDocument};
use asmplan::linebalance::{evaluate, BalanceInstance};
use asmplan::orchestrator::{
    handle_conflict, plan, render_plan, Agents, ConflictOutcome, PlanConfig, PlanError, PlannerState, SubtaskVerb,
};
use asmplan::scenegraph::SceneGraph;

const INSTRUCTION: &str = "Assemble the pressure reducing valve HTCVC";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn knowledge() -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new();
    let mut docs: Vec<PathBuf> = std::fs::read_dir(fixtures().join("connectors"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    docs.push(fixtures().join("valve/pressure_valve_doc.json"));
    docs.sort();
    for d in docs {
        kg.ingest(&ProcessDocument::load(&d).unwrap()).unwrap();
    }
    kg
}

fn scene() -> SceneGraph {
    SceneGraph::load(&fixtures().join("valve/scene.json")).unwrap()
}

fn config(ct_limit: f64, stations: Option<usize>) -> PlanConfig {
    PlanConfig {
        ct_limit,
        stations,
        ..PlanConfig::default()
    }
}

#[test]
fn valve_plan_is_complete_and_consistent() {
    let (kg, sg) = (knowledge(), scene());
    let start = Instant::now();
    let (list, state) = plan(INSTRUCTION, &kg, &sg, config(250.0, None), &mut Agents::scripted()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 2.0);

    assert_eq!(list.product_id, "PRV-HTCVC");
    assert_eq!(list.stations, 5);
    assert_eq!(state.artifacts.processes.len(), 12);
    assert_eq!(list.process_stations().len(), 12);
    assert_eq!(Some(&list.assignment), state.artifacts.assignment.as_ref());
    assert_eq!(list.process_stations(), list.assignment.station_map());
    assert_eq!(list.verify(&kg, &sg), Vec::<String>::new());

    // Stations appear in non-decreasing order and every process has exactly
    // one operation carrying its duration.
    assert!(list.subtasks.windows(2).all(|w| w[0].station <= w[1].station));
    let operations: Vec<_> = list.subtasks.iter().filter(|s| s.duration_s.is_some()).collect();
    assert_eq!(operations.len(), 12);
    let total: f64 = operations.iter().filter_map(|s| s.duration_s).sum();
    assert_eq!(total, 1135.0);
    assert!(list.subtasks.iter().any(|s| s.verb == SubtaskVerb::Pick));

    let report = state.artifacts.balance.as_ref().unwrap();
    assert!(report.feasible);
    assert!(report.ct < 250.0);

    // The same assignment evaluated on the reference CSV gives the same loads.
    // The document numbers steps in execution order; the CSV keeps the
    // reference task numbering.
    const CSV_ID: [&str; 12] = ["1", "2", "4", "8", "9", "10", "11", "12", "3", "5", "6", "7"];
    let inst = BalanceInstance::from_csv(&fixtures().join("valve/pressure_valve_table2.csv"), 5, Some(250.0)).unwrap();
    let renamed = list
        .assignment
        .stations
        .iter()
        .map(|s| {
            s.iter()
                .map(|pid| {
                    let order: usize = pid.rsplit("step_").next().unwrap().parse().unwrap();
                    CSV_ID[order - 1].to_string()
                })
                .collect()
        })
        .collect();
    let csv_report = evaluate(&inst, &asmplan::linebalance::Assignment::new(renamed)).unwrap();
    assert_eq!(csv_report.loads, report.loads);
    assert!(csv_report.feasible);

    let text = render_plan(&list, &state.artifacts, &kg);
    assert!(text.contains("workstation"), "{text}");
}

#[test]
fn valve_plan_is_deterministic() {
    let (kg, sg) = (knowledge(), scene());
    let run = || {
        let (list, state) = plan(INSTRUCTION, &kg, &sg, config(250.0, None), &mut Agents::scripted()).unwrap();
        (
            serde_json::to_string(&list).unwrap(),
            state.trace_jsonl(),
            render_plan(&list, &state.artifacts, &kg),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn unreachable_limit_ends_in_verdict_citing_bound() {
    let (kg, sg) = (knowledge(), scene());
    let failure = plan(INSTRUCTION, &kg, &sg, config(100.0, None), &mut Agents::scripted()).unwrap_err();
    match &failure.error {
        PlanError::Infeasible(v) => {
            assert_eq!(v.stations_max, 5);
            assert_eq!(v.lower_bound_ct, 227.0);
            assert_eq!(v.total_work, 1135.0);
            assert!(!v.evidence.is_empty());
            assert!(v.to_string().contains("227"));
        }
        other => panic!("expected a verdict, got {other}"),
    }
    assert!(failure.state.trace.len() <= failure.state.config.max_iterations);
}

#[test]
fn four_stations_escalate_to_five() {
    let (kg, sg) = (knowledge(), scene());
    let (list, state) = plan(INSTRUCTION, &kg, &sg, config(250.0, Some(4)), &mut Agents::scripted()).unwrap();
    assert_eq!(list.stations, 5);
    assert_eq!(state.conflict.stations, 5);
    assert!(state.conflict.evidence.iter().any(|e| e.starts_with("m=4")));
    assert!(state
        .trace
        .iter()
        .any(|r| r.observation.contains("m=4") || r.observation.contains("4 stations")));
    assert!(list.verify(&kg, &sg).is_empty());
}

#[test]
fn conflict_ladder_retries_then_escalates_then_stops() {
    let (kg, sg) = (knowledge(), scene());
    let (_, done) = plan(INSTRUCTION, &kg, &sg, config(250.0, None), &mut Agents::scripted()).unwrap();
    let mut report = done.artifacts.balance.clone().unwrap();
    report.feasible = false;

    let mut state = PlannerState::new(INSTRUCTION, config(250.0, Some(4)), 5);
    state.artifacts.processes = done.artifacts.processes.clone();
    let mut outcomes = Vec::new();
    loop {
        let o = handle_conflict(&mut state, &report).unwrap();
        let stop = matches!(o, ConflictOutcome::Verdict(_));
        outcomes.push(o);
        if stop {
            break;
        }
    }
    assert_eq!(
        outcomes[..6],
        [
            ConflictOutcome::Retry { attempt: 1 },
            ConflictOutcome::Retry { attempt: 2 },
            ConflictOutcome::Escalate { stations: 5 },
            ConflictOutcome::Retry { attempt: 1 },
            ConflictOutcome::Retry { attempt: 2 },
            outcomes[5].clone(),
        ]
    );
    let ConflictOutcome::Verdict(v) = &outcomes[5] else {
        panic!("ladder did not end in a verdict")
    };
    assert_eq!(v.lower_bound_ct, 227.0);
    assert_eq!(v.evidence.len(), 6);
    assert!(!state.flags.balance_solved);
}
