use std::path::PathBuf;

use asmplan::backend::scripted::{ScriptedProposer, ScriptedReflector};
use asmplan::evalharness::{balance_report_table, BalanceRun, BalanceTable, InstanceKey};
use asmplan::linebalance::{
    evaluate_feedback, solve_baseline, solve_oracle, solve_reflective, Assignment, BalanceInstance, BalanceReport,
    Constraints,
};
use asmplan::orchestrator::InfeasibilityVerdict;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::error::CliError;
use crate::{emit, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Oracle,
    Anneal,
    Reflect,
}

impl Solver {
    pub fn label(self) -> &'static str {
        match self {
            Solver::Oracle => "Branch and bound",
            Solver::Anneal => "Annealing",
            Solver::Reflect => "Reflective",
        }
    }
}

/// Instance and solver options shared with `eval balance`.
#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// CSV with columns id, duration_s, predecessors (`;`-separated), optional tool.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub stations: usize,
    /// Every station load must stay strictly below this many seconds.
    #[arg(long)]
    pub ct_limit: Option<f64>,
    /// Required by the annealing solver.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Proposal rounds for the reflective solver.
    #[arg(long, default_value_t = 20)]
    pub rounds: usize,
    /// Evaluation budget for the annealing solver.
    #[arg(long, default_value_t = 5000)]
    pub budget: usize,
}

#[derive(Args)]
pub struct BalanceArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum)]
    solver: Solver,
}

pub struct Solved {
    pub assignment: Assignment,
    pub report: BalanceReport,
}

pub fn load_instance(args: &SolveArgs) -> Result<BalanceInstance, CliError> {
    if args.stations == 0 {
        return Err(CliError::Usage("--stations must be at least 1".into()));
    }
    Ok(BalanceInstance::from_csv(&args.instance, args.stations, args.ct_limit)?)
}

pub fn solve(inst: &BalanceInstance, solver: Solver, args: &SolveArgs) -> Result<Solved, CliError> {
    Ok(match solver {
        Solver::Oracle => {
            let r = solve_oracle(inst)?;
            Solved {
                assignment: r.assignment,
                report: r.report,
            }
        }
        Solver::Anneal => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("the annealing solver needs --seed".into()))?;
            let r = solve_baseline(inst, seed, args.budget)?;
            Solved {
                assignment: r.assignment,
                report: r.report,
            }
        }
        Solver::Reflect => {
            let out = solve_reflective(
                inst,
                &mut ScriptedProposer,
                &mut ScriptedReflector,
                args.rounds,
                Constraints::for_instance(inst),
            )
            .map_err(|e| CliError::Failed(e.to_string()))?;
            Solved {
                assignment: out.assignment,
                report: out.report,
            }
        }
    })
}

pub fn verdict(inst: &BalanceInstance, report: &BalanceReport) -> InfeasibilityVerdict {
    InfeasibilityVerdict {
        stations_max: inst.stations(),
        total_work: inst.total_work(),
        lower_bound_ct: inst.lower_bound_ct(),
        ct_limit: inst.ct_limit().unwrap_or(f64::INFINITY),
        evidence: vec![evaluate_feedback(report).summary()],
    }
}

#[derive(Serialize)]
struct BalanceOutput<'a> {
    solver: Solver,
    table: &'a BalanceTable,
    assignment: &'a Assignment,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<&'a InfeasibilityVerdict>,
}

pub fn render_assignment(a: &Assignment, report: &BalanceReport) -> String {
    let mut out = String::new();
    for (s, tasks) in a.stations.iter().enumerate() {
        out.push_str(&format!(
            "Station {}: {} (load {} s)\n",
            s + 1,
            if tasks.is_empty() {
                "-".to_string()
            } else {
                tasks.join(", ")
            },
            report.loads.get(s).copied().unwrap_or(0.0)
        ));
    }
    out
}

pub fn run(args: BalanceArgs, format: Format) -> Result<(), CliError> {
    let inst = load_instance(&args.solve)?;
    let solved = solve(&inst, args.solver, &args.solve)?;
    let table = balance_report_table(&[BalanceRun {
        method: args.solver.label().to_string(),
        instance: InstanceKey::of(&inst),
        report: solved.report.clone(),
    }])?;
    let verdict = (!solved.report.feasible).then(|| verdict(&inst, &solved.report));
    let output = BalanceOutput {
        solver: args.solver,
        table: &table,
        assignment: &solved.assignment,
        verdict: verdict.as_ref(),
    };
    emit(format, &output, || {
        let mut out = table.render();
        out.push_str(&render_assignment(&solved.assignment, &solved.report));
        if let Some(v) = &verdict {
            out.push_str(&format!("{v}\n"));
        }
        out
    })?;
    match verdict {
        Some(v) => Err(CliError::Failed(v.to_string())),
        None => Ok(()),
    }
}
