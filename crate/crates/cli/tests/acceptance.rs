//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use asmplan::backend::scripted::{ScriptedProposer, ScriptedReflector, ScriptedSynthesizer};
use asmplan::evalharness::{
    balance_report_table, lbr_percent, load_qa_items, load_task_plans, percent2, plan_accuracy, ptwa, qa_accuracy,
    BalanceRun, HopWeights, InstanceKey, QaResult, QuestionType, TypeAccuracy,
};
use asmplan::kgraph::{KnowledgeGraph, ProcessDocument, ProcessStep};
use asmplan::linebalance::{
    evaluate, precedence_violations, solve_baseline, solve_oracle, solve_reflective, Assignment, BalanceInstance,
    BalanceReport, BalanceTask, Constraints,
};
use asmplan::orchestrator::{plan, Agents, PlanConfig, PlanError, SubtaskList};
use asmplan::retrieval::{KnowledgeAgent, Query};
use asmplan::scenegraph::SceneGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const VALVE: &str = "Assemble the pressure reducing valve HTCVC";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table2(stations: usize, ct_limit: Option<f64>) -> Result<BalanceInstance, String> {
    BalanceInstance::from_csv(&fixtures().join("valve/pressure_valve_table2.csv"), stations, ct_limit)
        .map_err(|e| e.to_string())
}

fn graph(with_valve: bool) -> Result<KnowledgeGraph, String> {
    let mut docs: Vec<PathBuf> = std::fs::read_dir(fixtures().join("connectors"))
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    docs.sort();
    if with_valve {
        docs.push(fixtures().join("valve/pressure_valve_doc.json"));
    }
    let mut kg = KnowledgeGraph::new();
    for d in docs {
        let doc = ProcessDocument::load(&d).map_err(|e| e.to_string())?;
        kg.ingest(&doc).map_err(|e| e.to_string())?;
    }
    Ok(kg)
}

/// `LBR · m · CT = Σ loads` on one report.
fn lbr_identity(r: &BalanceReport) -> Result<(), String> {
    let lhs = r.lbr / 100.0 * r.stations as f64 * r.ct;
    let rhs: f64 = r.loads.iter().sum();
    ensure((lhs - rhs).abs() <= 1e-9, || {
        format!("LBR identity off by {}", lhs - rhs)
    })
}

fn c1_lbr_rates() -> Outcome {
    let start = Instant::now();
    let total = table2(5, None)?.total_work();
    ensure(total == 1135.0, || format!("total work {total}"))?;
    let a = lbr_percent(total, 5, 247.0);
    let b = lbr_percent(total, 5, 243.0);
    ensure((a - 91.9).abs() <= 0.05, || format!("CT 247 gives {a:.3}%"))?;
    ensure((b - 93.4).abs() <= 0.05, || format!("CT 243 gives {b:.3}%"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.2} s"))?;
    Ok(format!("LBR {a:.2}% at CT 247, {b:.2}% at CT 243"))
}

fn c2_oracle_bound() -> Outcome {
    let inst = table2(5, None)?;
    let start = Instant::now();
    let r = solve_oracle(&inst).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let ct = r.report.ct;
    ensure((227.0..=240.0).contains(&ct), || format!("CT* = {ct}"))?;
    ensure(ct == 240.0, || format!("CT* = {ct}, recorded oracle value is 240"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    // Feasible witness for the upper bound.
    let hand = Assignment::from_ids(&[
        &["8", "9"][..],
        &["1", "10"],
        &["2", "11"],
        &["4", "12", "3"],
        &["5", "6", "7"],
    ]);
    let witness = evaluate(&inst, &hand).map_err(|e| e.to_string())?;
    ensure(witness.loads == [240.0, 226.0, 229.0, 223.0, 217.0], || {
        format!("witness loads {:?}", witness.loads)
    })?;
    ensure(precedence_violations(inst.tasks(), &hand).is_empty(), || {
        "witness breaks precedence".into()
    })?;
    ensure(inst.lower_bound_ct() == 227.0, || {
        format!("lower bound {}", inst.lower_bound_ct())
    })?;
    Ok(format!("CT* = {ct} in {secs:.3} s ({} nodes)", r.nodes))
}

fn c3_feasibility() -> Outcome {
    let inst = table2(5, Some(250.0))?;
    let oracle = solve_oracle(&inst).map_err(|e| e.to_string())?;
    let anneal = solve_baseline(&inst, 7, 5000).map_err(|e| e.to_string())?;
    let reflect = solve_reflective(
        &inst,
        &mut ScriptedProposer,
        &mut ScriptedReflector,
        20,
        Constraints::for_instance(&inst),
    )
    .map_err(|e| e.to_string())?;
    for (name, r) in [
        ("oracle", &oracle.report),
        ("annealing", &anneal.report),
        ("reflective", &reflect.report),
    ] {
        ensure(r.feasible && r.ct < 250.0, || format!("{name} CT {}", r.ct))?;
        lbr_identity(r)?;
    }
    let nitc = reflect.report.nitc.ok_or("reflective solver never feasible")?;
    ensure(nitc <= 20, || format!("reflective NITC {nitc}"))?;
    let key = InstanceKey::of(&inst);
    let runs: Vec<BalanceRun> = [
        ("Branch and bound", oracle.report.clone()),
        ("Annealing", anneal.report.clone()),
        ("Reflective", reflect.report.clone()),
    ]
    .into_iter()
    .map(|(m, report)| BalanceRun {
        method: m.into(),
        instance: key.clone(),
        report,
    })
    .collect();
    balance_report_table(&runs).map_err(|e| e.to_string())?;
    Ok(format!(
        "CT oracle {} / annealing {} / reflective {} (NITC {nitc})",
        oracle.report.ct, anneal.report.ct, reflect.report.ct
    ))
}

fn random_dag(rng: &mut ChaCha8Rng) -> BalanceInstance {
    let n = rng.gen_range(1..=10);
    let m = rng.gen_range(1..=4);
    let tasks: Vec<BalanceTask> = (0..n)
        .map(|i| {
            let preds: Vec<String> = (0..i).filter(|_| rng.gen_bool(0.3)).map(|j| format!("t{j}")).collect();
            BalanceTask::new(format!("t{i}"), rng.gen_range(1..=60) as f64, preds)
        })
        .collect();
    let total: f64 = tasks.iter().map(|t| t.duration_s).sum();
    let limit = (total / m as f64 * rng.gen_range(1.0..1.6)).ceil() + 1.0;
    BalanceInstance::new(tasks, m, Some(limit)).expect("generated instance is valid")
}

fn c4_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cases = 250;
    for case in 0..cases {
        let inst = random_dag(&mut rng);
        let oracle = solve_oracle(&inst).map_err(|e| e.to_string())?;
        let baseline = solve_baseline(&inst, case, 500).map_err(|e| e.to_string())?;
        let reflect = solve_reflective(
            &inst,
            &mut ScriptedProposer,
            &mut ScriptedReflector,
            20,
            Constraints::for_instance(&inst),
        )
        .map_err(|e| e.to_string())?;
        let star = oracle.report.ct;
        ensure(baseline.report.ct >= star && reflect.report.ct >= star, || {
            format!("case {case}: a solver beat CT* = {star}")
        })?;
        for a in [&oracle.assignment, &baseline.assignment, &reflect.assignment] {
            let bad = precedence_violations(inst.tasks(), a);
            ensure(bad.is_empty(), || format!("case {case}: precedence broken {bad:?}"))?;
        }
        for r in [&oracle.report, &baseline.report, &reflect.report] {
            lbr_identity(r)?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{cases} random DAGs in {secs:.2} s"))
}

fn c5_qa() -> Outcome {
    let kg = graph(false)?;
    let agent = KnowledgeAgent::new(&kg);
    let items = load_qa_items(&fixtures().join("qa/connector_qa.jsonl")).map_err(|e| e.to_string())?;
    let types: BTreeSet<QuestionType> = items.iter().map(|i| i.qtype).collect();
    ensure(items.len() >= 60 && types.len() == 6, || {
        format!("{} questions over {} types", items.len(), types.len())
    })?;
    let exemplar = "In step 05 of inserting socket parts during connector C901 assembly, which part serves as the reference component?";
    ensure(items.iter().any(|i| i.question == exemplar), || {
        "exemplar question missing".into()
    })?;
    let mut results = Vec::new();
    for item in items {
        let q = Query::new(item.question.clone()).map_err(|e| e.to_string())?;
        let (answer, _) = agent.answer(&q, &ScriptedSynthesizer).map_err(|e| e.to_string())?;
        results.push(QaResult::judge(item, answer.text));
    }
    let acc = qa_accuracy(&results).map_err(|e| e.to_string())?;
    ensure(acc.overall == 1.0, || {
        let misses: Vec<&str> = results
            .iter()
            .filter(|r| !r.correct)
            .map(|r| r.item.id.as_str())
            .collect();
        format!("{}/{} correct, misses {misses:?}", acc.correct, acc.total)
    })?;
    Ok(format!("{}/{} questions correct", acc.correct, acc.total))
}

fn c6_metrics() -> Outcome {
    let row = [
        (QuestionType::OverallProcess, 19, 1.0),
        (QuestionType::Applicability, 38, 1.0),
        (QuestionType::SequenceComparison, 166, 1.0),
        (QuestionType::SequenceLinking, 166, 0.988),
        (QuestionType::RequirementQuery, 74, 0.9865),
        (QuestionType::RelationComparison, 96, 0.9792),
    ];
    let per_type: Vec<TypeAccuracy> = row.iter().map(|&(t, n, a)| TypeAccuracy::new(t, n, a)).collect();
    let r = ptwa(&per_type, HopWeights::default()).map_err(|e| e.to_string())?;
    ensure((r.sha - 1.0).abs() < 1e-12, || format!("SHA {}", r.sha))?;
    ensure((r.mha - 0.990).abs() <= 0.001, || format!("MHA {}", r.mha))?;
    ensure((r.ptwa - 0.995).abs() <= 0.001, || format!("PTWA {}", r.ptwa))?;
    let inst = table2(5, Some(250.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for stations in 1..=6 {
        let inst = inst.with_stations(stations).map_err(|e| e.to_string())?;
        for seed in 0..5 {
            lbr_identity(
                &solve_baseline(&inst, rng.gen(), 200 + seed)
                    .map_err(|e| e.to_string())?
                    .report,
            )?;
            checked += 1;
        }
        lbr_identity(&solve_oracle(&inst).map_err(|e| e.to_string())?.report)?;
        checked += 1;
    }
    Ok(format!(
        "SHA {:.3}, MHA {:.3}, PTWA {:.3}; LBR identity on {checked} reports",
        r.sha, r.mha, r.ptwa
    ))
}

fn c7_plan_accuracy() -> Outcome {
    let gold = load_task_plans(&fixtures().join("eval/gold_plans.json")).map_err(|e| e.to_string())?;
    let mut shown = Vec::new();
    for (k, expected) in [(5, 26.32), (12, 63.16), (13, 68.42)] {
        let produced =
            load_task_plans(&fixtures().join(format!("eval/produced_{k}_of_19.json"))).map_err(|e| e.to_string())?;
        let acc = plan_accuracy(&produced, &gold).map_err(|e| e.to_string())?;
        let task = percent2(acc.task.accuracy);
        ensure(task == expected, || format!("{k}/19 gives {task}%"))?;
        shown.push(format!("{k}/19 -> {task:.2}%"));
    }
    let id = plan_accuracy(&gold, &gold).map_err(|e| e.to_string())?;
    let levels = [id.task, id.subtask, id.location, id.object];
    ensure(levels.iter().all(|l| l.accuracy == 1.0), || {
        "identity case below 100%".into()
    })?;
    Ok(format!("{}; identity 100% at all levels", shown.join(", ")))
}

fn c8_end_to_end() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let kb = dir.path().join("kb.json");
    graph(true)?.save(&kb).map_err(|e| e.to_string())?;
    let scene = fixtures().join("valve/scene.json");
    let run = || -> Result<(Vec<u8>, f64), String> {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_asmplan"))
            .args(["--format", "json", "plan", VALVE, "--graph"])
            .arg(&kb)
            .arg("--scene")
            .arg(&scene)
            .env_remove("ASMPLAN_LOG")
            .output()
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        Ok((out.stdout, secs))
    };
    let (first, secs) = run()?;
    let (second, _) = run()?;
    ensure(first == second, || "plan output differs between runs".into())?;
    ensure(secs < 2.0, || format!("took {secs:.2} s"))?;

    let v: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let list: SubtaskList = serde_json::from_value(v["plan"].clone()).map_err(|e| e.to_string())?;
    let processes = list.process_stations();
    ensure(processes.len() == 12, || format!("{} processes", processes.len()))?;
    ensure(list.stations == 5, || format!("{} stations", list.stations))?;
    ensure(processes == list.assignment.station_map(), || {
        "station allocation differs from the assignment".into()
    })?;
    let kg = KnowledgeGraph::load(&kb).map_err(|e| e.to_string())?;
    let sg = SceneGraph::load(&scene).map_err(|e| e.to_string())?;
    let problems = list.verify(&kg, &sg);
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!(
        "{} subtasks, 12 processes on 5 stations, identical across runs, {secs:.2} s",
        list.subtasks.len()
    ))
}

fn random_document(rng: &mut ChaCha8Rng, n: usize) -> ProcessDocument {
    const PARTS: [&str; 6] = ["shaft", "bearing", "gear", "cover", "gasket", "spring"];
    const TOOLS: [&str; 3] = ["press", "screwdriver", "gauge"];
    let steps = (1..=rng.gen_range(1..=5))
        .map(|order| ProcessStep {
            order,
            name: format!("Fit {}", PARTS[rng.gen_range(0..PARTS.len())]),
            duration_s: rng.gen_range(5..=60) as f64,
            parts: vec![PARTS[rng.gen_range(0..PARTS.len())].to_string()],
            tools: if rng.gen_bool(0.5) {
                vec![TOOLS[rng.gen_range(0..TOOLS.len())].to_string()]
            } else {
                Vec::new()
            },
            reference_part: None,
            predecessors: None,
            verb: None,
        })
        .collect();
    ProcessDocument {
        product_id: format!("G{n:03}"),
        product_name: Some(format!("Gearbox G{n:03}")),
        steps,
    }
}

fn c9_kb_dynamics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut g = KnowledgeGraph::new();
    let docs: Vec<ProcessDocument> = (0..100).map(|n| random_document(&mut rng, n)).collect();
    for (n, doc) in docs.iter().enumerate() {
        let before = g.clone();
        g.ingest(doc).map_err(|e| format!("doc {n}: {e}"))?;
        let monotone =
            before.entities().all(|e| g.entity(&e.id).is_some()) && before.relations().all(|r| g.contains_relation(r));
        ensure(monotone, || format!("doc {n} removed content"))?;
        let after = g.clone();
        g.ingest(doc).map_err(|e| e.to_string())?;
        g.ingest(&docs[rng.gen_range(0..=n)]).map_err(|e| e.to_string())?;
        ensure(g == after, || format!("re-ingesting around doc {n} changed the graph"))?;
        let agent = KnowledgeAgent::new(&g);
        let q = Query::new(format!("Gearbox G{n:03}")).map_err(|e| e.to_string())?;
        let hits = agent.retrieve(&q).map_err(|e| e.to_string())?;
        ensure(hits.rank_of(&doc.product_id).is_some(), || {
            format!("{} not retrieved", doc.product_id)
        })?;
    }
    Ok(format!(
        "100 documents, {} entities, {} relations",
        g.entity_count(),
        g.relation_count()
    ))
}

fn c10_conflict_loop() -> Outcome {
    let kg = graph(true)?;
    let sg = SceneGraph::load(&fixtures().join("valve/scene.json")).map_err(|e| e.to_string())?;
    let config = |ct_limit, stations| PlanConfig {
        ct_limit,
        stations,
        ..PlanConfig::default()
    };
    let failure = match plan(VALVE, &kg, &sg, config(100.0, None), &mut Agents::scripted()) {
        Ok(_) => return Err("ct_limit 100 produced a plan".into()),
        Err(f) => f,
    };
    let bound = match &failure.error {
        PlanError::Infeasible(v) => v.lower_bound_ct,
        other => return Err(format!("expected a verdict, got {other}")),
    };
    ensure(bound == 227.0, || format!("verdict cites bound {bound}"))?;

    let four = table2(4, None)?.lower_bound_ct();
    ensure(four == 284.0, || format!("m=4 bound {four}"))?;
    let (list, state) =
        plan(VALVE, &kg, &sg, config(250.0, Some(4)), &mut Agents::scripted()).map_err(|f| f.to_string())?;
    ensure(list.stations == 5, || format!("ended on {} stations", list.stations))?;
    let ct = state.artifacts.balance.as_ref().map_or(f64::NAN, |r| r.ct);
    Ok(format!(
        "verdict cites 227 at ct_limit 100; m=4 (bound {four}) escalates to m=5 with CT {ct}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("LBR identity on reported rows", c1_lbr_rates),
        ("oracle optimality bound", c2_oracle_bound),
        ("feasibility under CT < 250", c3_feasibility),
        ("oracle-equivalence property suite", c4_oracle_equivalence),
        ("QA exactness on fixtures", c5_qa),
        ("metric recomputation", c6_metrics),
        ("planning accuracy arithmetic", c7_plan_accuracy),
        ("end-to-end determinism", c8_end_to_end),
        ("knowledge-base dynamics", c9_kb_dynamics),
        ("conflict loop", c10_conflict_loop),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
