use std::path::PathBuf;

use asmplan::backend::chat::ChatSynthesizer;
use asmplan::backend::scripted::ScriptedSynthesizer;
use asmplan::evalharness::{
    balance_report_table, load_qa_items, load_task_plans, plan_accuracy, plan_accuracy_runs, ptwa, qa_accuracy,
    AccuracyReport, BalanceRun, HopWeights, InstanceKey, QaResult,
};
use asmplan::retrieval::{KnowledgeAgent, Query, Synthesizer, DEFAULT_K};
use clap::Args;

use crate::balance::{load_instance, solve, SolveArgs, Solver};
use crate::error::CliError;
use crate::kb::load_graph;
use crate::{emit, BackendArgs, Format};

#[derive(Args)]
pub struct QaArgs {
    /// JSON lines with id, type, question and gold.
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    backend: BackendArgs,
    /// List every wrong answer on stderr.
    #[arg(long)]
    show_misses: bool,
}

#[derive(Args)]
pub struct PlanEvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Repeat for several runs; the report then carries the per-level mean.
    #[arg(long, required = true)]
    produced: Vec<PathBuf>,
}

#[derive(Args)]
pub struct BalanceEvalArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "oracle,anneal,reflect")]
    solvers: Vec<Solver>,
}

pub fn qa(args: QaArgs, format: Format) -> Result<(), CliError> {
    let client = args.backend.http_client()?;
    let items = load_qa_items(&args.questions)?;
    let g = load_graph(&args.graph)?;
    let agent = KnowledgeAgent::with_k(&g, args.k);
    let synth: Box<dyn Synthesizer + '_> = match &client {
        Some(c) => Box::new(ChatSynthesizer::new(c)),
        None => Box::new(ScriptedSynthesizer),
    };
    let mut results = Vec::with_capacity(items.len());
    for item in items {
        let q = Query::new(item.question.clone())?;
        let (answer, _) = agent.answer(&q, synth.as_ref())?;
        let r = QaResult::judge(item, answer.text);
        if args.show_misses && !r.correct {
            eprintln!("miss {}: got {:?}, expected {:?}", r.item.id, r.produced, r.item.gold);
        }
        results.push(r);
    }
    let acc = qa_accuracy(&results)?;
    let report = AccuracyReport {
        ptwa: ptwa(&acc.per_type, HopWeights::default()).ok(),
        qa: Some(acc),
        plan: None,
    };
    emit(format, &report, || report.render())
}

pub fn plan(args: PlanEvalArgs, format: Format) -> Result<(), CliError> {
    let gold = load_task_plans(&args.gold)?;
    let mut runs = Vec::new();
    for path in &args.produced {
        runs.push(plan_accuracy(&load_task_plans(path)?, &gold)?);
    }
    if runs.len() == 1 {
        let report = AccuracyReport {
            plan: runs.pop(),
            ..Default::default()
        };
        return emit(format, &report, || report.render());
    }
    let series = plan_accuracy_runs(runs)?;
    emit(format, &series, || {
        let mut out = String::new();
        for (i, run) in series.runs.iter().enumerate() {
            out.push_str(&format!("Run {}\n", i + 1));
            out.push_str(
                &AccuracyReport {
                    plan: Some(run.clone()),
                    ..Default::default()
                }
                .render(),
            );
        }
        let m = &series.mean;
        out.push_str(&format!(
            "Mean over {} runs: Task {:.2}%  Subtask {:.2}%  Location {:.2}%  Object {:.2}%\n",
            series.runs.len(),
            m.task,
            m.subtask,
            m.location,
            m.object
        ));
        out
    })
}

pub fn balance(args: BalanceEvalArgs, format: Format) -> Result<(), CliError> {
    let inst = load_instance(&args.solve)?;
    let key = InstanceKey::of(&inst);
    let mut runs = Vec::new();
    for &solver in &args.solvers {
        let solved = solve(&inst, solver, &args.solve)?;
        runs.push(BalanceRun {
            method: solver.label().to_string(),
            instance: key.clone(),
            report: solved.report,
        });
    }
    let table = balance_report_table(&runs)?;
    emit(format, &table, || table.render())
}
