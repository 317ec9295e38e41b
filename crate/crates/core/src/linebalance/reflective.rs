use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instance::{Assignment, BalanceInstance};
use super::report::{evaluate, BalanceReport, Violation};

/// Constraint set handed to the proposer and the reflector each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub ct_limit: Option<f64>,
    pub stations: usize,
    #[serde(default)]
    pub tool_rules: Vec<String>,
    /// Violation evidence carried over from earlier failed solves.
    #[serde(default)]
    pub evidence: Vec<String>,
    /// Number of earlier failed solves on this problem.
    #[serde(default)]
    pub attempt: usize,
}

impl Constraints {
    pub fn for_instance(inst: &BalanceInstance) -> Self {
        Constraints {
            ct_limit: inst.ct_limit(),
            stations: inst.stations(),
            tool_rules: Vec::new(),
            evidence: Vec::new(),
            attempt: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationOverload {
    /// 1-based.
    pub station: usize,
    pub load: f64,
    pub overload: f64,
}

/// Structured verdict on one proposal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub feasible: bool,
    pub overloads: Vec<StationOverload>,
    pub precedence: Vec<(String, String)>,
    /// Set when the proposal could not be evaluated at all.
    pub malformed: Option<String>,
}

impl Evaluation {
    pub fn malformed(reason: impl Into<String>) -> Self {
        Evaluation {
            malformed: Some(reason.into()),
            ..Default::default()
        }
    }

    pub fn summary(&self) -> String {
        if let Some(reason) = &self.malformed {
            return format!("proposal rejected: {reason}");
        }
        if self.feasible {
            return "feasible".to_string();
        }
        let mut parts = Vec::new();
        for o in &self.overloads {
            parts.push(format!(
                "station {} load {} exceeds the limit by {}",
                o.station,
                fmt_s(o.load),
                fmt_s(o.overload)
            ));
        }
        for (p, s) in &self.precedence {
            parts.push(format!("task {p} must precede task {s}"));
        }
        parts.join("; ")
    }
}

/// Evaluator: turns a report into the overload and precedence verdict.
pub fn evaluate_feedback(report: &BalanceReport) -> Evaluation {
    let mut overloads: Vec<StationOverload> = report
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::CycleTime {
                station,
                load,
                overload,
                ..
            } => Some(StationOverload {
                station: *station,
                load: *load,
                overload: *overload,
            }),
            Violation::Precedence { .. } => None,
        })
        .collect();
    overloads.sort_by(|a, b| b.overload.total_cmp(&a.overload).then(a.station.cmp(&b.station)));
    Evaluation {
        feasible: report.feasible,
        overloads,
        precedence: report.precedence_pairs(),
        malformed: None,
    }
}

/// Latest observation and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortMemory {
    pub round: usize,
    pub assignment: Assignment,
    pub report: Option<BalanceReport>,
    pub evaluation: Evaluation,
}

/// One concrete change to an assignment. Stations are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "snake_case")]
pub enum Edit {
    Move {
        task: String,
        from: usize,
        to: usize,
    },
    Swap {
        a: String,
        a_from: usize,
        b: String,
        b_from: usize,
    },
}

impl Edit {
    /// Applies the edit to a station vector (0-based stations per task index).
    pub fn apply(&self, inst: &BalanceInstance, station_of: &mut [usize]) -> bool {
        match self {
            Edit::Move { task, to, .. } => match inst.task_index(task) {
                Some(i) if *to >= 1 && *to <= inst.stations() => {
                    station_of[i] = to - 1;
                    true
                }
                _ => false,
            },
            Edit::Swap { a, b, .. } => match (inst.task_index(a), inst.task_index(b)) {
                (Some(i), Some(j)) => {
                    station_of.swap(i, j);
                    true
                }
                _ => false,
            },
        }
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edit::Move { task, from, to } => {
                write!(f, "move task {task} from station {from} to station {to}")
            }
            Edit::Swap { a, a_from, b, b_from } => {
                write!(f, "swap task {a} (station {a_from}) with task {b} (station {b_from})")
            }
        }
    }
}

/// Self-reflection output for one failed round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reflection {
    pub round: usize,
    pub text: String,
    /// Most-overloaded station (1-based) and its overload.
    pub station: Option<usize>,
    pub overload: Option<f64>,
    /// Tasks on that station short enough to absorb the overload and with a
    /// legal destination.
    pub movable: Vec<String>,
    pub suggested: Option<Edit>,
    /// Further edits, best first.
    pub alternatives: Vec<Edit>,
    /// The proposal this reflection is about.
    pub assignment: Option<Assignment>,
}

impl Reflection {
    pub fn is_empty(&self) -> bool {
        self.text.is_empty() && self.suggested.is_none() && self.alternatives.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectiveMemory {
    pub short: Option<ShortMemory>,
    /// Append-only; one entry per completed reflection round.
    pub long: Vec<Reflection>,
    pub constraints: Constraints,
}

/// Everything the Actor may condition on.
#[derive(Debug, Clone, Copy)]
pub struct ActorInput<'a> {
    pub instance: &'a BalanceInstance,
    pub round: usize,
    pub constraints: &'a Constraints,
    pub short: Option<&'a ShortMemory>,
    pub long: &'a [Reflection],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposerError {
    #[error("proposer transport failed: {0}")]
    Transport(#[from] crate::backend::TransportError),
    #[error("proposer output unusable: {0}")]
    Malformed(String),
}

/// The Actor.
pub trait Proposer {
    fn propose(&mut self, input: &ActorInput<'_>) -> Result<Assignment, ProposerError>;
}

/// The self-reflection step.
pub trait Reflector {
    fn reflect(&mut self, inst: &BalanceInstance, short: &ShortMemory, constraints: &Constraints) -> Reflection;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectiveOutcome {
    /// First feasible proposal, or the least-violating one seen.
    pub assignment: Assignment,
    pub report: BalanceReport,
    pub memory: ReflectiveMemory,
    pub rounds: usize,
    pub feasible: bool,
}

/// Propose, evaluate and reflect until a proposal is feasible or
/// `max_rounds` proposals have been made.
///
/// Unusable proposals count as rounds and are reflected on like any other
/// failure; only transport errors abort the loop.
pub fn solve_reflective(
    inst: &BalanceInstance,
    proposer: &mut dyn Proposer,
    reflector: &mut dyn Reflector,
    max_rounds: usize,
    constraints: Constraints,
) -> Result<ReflectiveOutcome, ProposerError> {
    let mut memory = ReflectiveMemory {
        short: None,
        long: Vec::new(),
        constraints,
    };
    let mut best: Option<(Assignment, BalanceReport)> = None;
    for round in 1..=max_rounds.max(1) {
        let input = ActorInput {
            instance: inst,
            round,
            constraints: &memory.constraints,
            short: memory.short.as_ref(),
            long: &memory.long,
        };
        let proposal = match proposer.propose(&input) {
            Ok(a) => Ok(a),
            Err(ProposerError::Malformed(reason)) => Err(reason),
            Err(e) => return Err(e),
        };
        let (assignment, report, evaluation) = match proposal {
            Ok(a) => match evaluate(inst, &a) {
                Ok(report) => {
                    let evaluation = evaluate_feedback(&report);
                    (a, Some(report), evaluation)
                }
                Err(e) => (a, None, Evaluation::malformed(e.to_string())),
            },
            Err(reason) => (Assignment::new(Vec::new()), None, Evaluation::malformed(reason)),
        };
        tracing::debug!(round, verdict = %evaluation.summary(), "reflective round");
        if let Some(report) = &report {
            if report.feasible {
                let mut report = report.clone();
                report.nitc = Some(round);
                memory.short = Some(ShortMemory {
                    round,
                    assignment: assignment.clone(),
                    report: Some(report.clone()),
                    evaluation,
                });
                return Ok(ReflectiveOutcome {
                    assignment,
                    report,
                    memory,
                    rounds: round,
                    feasible: true,
                });
            }
            if best
                .as_ref()
                .is_none_or(|(_, b)| violation_key(report) < violation_key(b))
            {
                best = Some((assignment.clone(), report.clone()));
            }
        }
        let short = ShortMemory {
            round,
            assignment,
            report,
            evaluation,
        };
        let mut reflection = reflector.reflect(inst, &short, &memory.constraints);
        reflection.round = round;
        if reflection.assignment.is_none() && short.report.is_some() {
            reflection.assignment = Some(short.assignment.clone());
        }
        memory.long.push(reflection);
        memory.short = Some(short);
    }
    let rounds = max_rounds.max(1);
    let (assignment, report) = match best {
        Some(b) => b,
        None => {
            let a = inst.assignment_from_stations(&sequential_fill(inst));
            let r = evaluate(inst, &a).expect("constructed assignment covers every task");
            (a, r)
        }
    };
    Ok(ReflectiveOutcome {
        assignment,
        report,
        memory,
        rounds,
        feasible: false,
    })
}

fn violation_key(r: &BalanceReport) -> (usize, u64, u64) {
    (r.precedence_pairs().len(), r.total_overload().to_bits(), r.ct.to_bits())
}

/// Fills stations in canonical topological order, moving on when the next
/// task would break the limit. The last station takes the remainder.
pub fn sequential_fill(inst: &BalanceInstance) -> Vec<usize> {
    let m = inst.stations();
    let capacity_ok = |load: f64| match inst.ct_limit() {
        Some(_) => inst.within_limit(load),
        None => load <= inst.lower_bound_ct(),
    };
    let mut station_of = vec![0; inst.len()];
    let mut s = 0;
    let mut load = 0.0;
    for &i in inst.topo_order() {
        let d = inst.duration(i);
        if load > 0.0 && !capacity_ok(load + d) && s + 1 < m {
            s += 1;
            load = 0.0;
        }
        station_of[i] = s;
        load += d;
    }
    station_of
}

/// Inclusive 0-based station range open to `task` with every other task
/// held in place.
pub fn legal_station_range(inst: &BalanceInstance, station_of: &[usize], task: usize) -> (usize, usize) {
    let lo = inst.preds(task).iter().map(|&p| station_of[p]).max().unwrap_or(0);
    let hi = inst
        .succs(task)
        .iter()
        .map(|&q| station_of[q])
        .min()
        .unwrap_or(inst.stations() - 1);
    (lo, hi)
}

fn fmt_s(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0} s")
    } else {
        format!("{v:.2} s")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linebalance::BalanceTask;

    struct Fixed(Vec<Assignment>);

    impl Proposer for Fixed {
        fn propose(&mut self, input: &ActorInput<'_>) -> Result<Assignment, ProposerError> {
            Ok(self.0[(input.round - 1).min(self.0.len() - 1)].clone())
        }
    }

    struct Echo;

    impl Reflector for Echo {
        fn reflect(&mut self, _: &BalanceInstance, short: &ShortMemory, _: &Constraints) -> Reflection {
            Reflection {
                text: short.evaluation.summary(),
                ..Default::default()
            }
        }
    }

    fn pair(limit: f64) -> BalanceInstance {
        let tasks = vec![
            BalanceTask::new("a", 4.0, Vec::<String>::new()),
            BalanceTask::new("b", 4.0, ["a"]),
        ];
        BalanceInstance::new(tasks, 2, Some(limit)).unwrap()
    }

    #[test]
    fn feasible_first_round_leaves_long_memory_empty() {
        let inst = pair(5.0);
        let mut p = Fixed(vec![Assignment::from_ids(&[&["a"], &["b"]])]);
        let out = solve_reflective(&inst, &mut p, &mut Echo, 10, Constraints::for_instance(&inst)).unwrap();
        assert!(out.feasible);
        assert_eq!(out.rounds, 1);
        assert_eq!(out.report.nitc, Some(1));
        assert!(out.memory.long.is_empty());
    }

    #[test]
    fn long_memory_grows_per_failed_round() {
        let inst = pair(5.0);
        let bad = Assignment::from_ids(&[&["a", "b"], &[]]);
        let good = Assignment::from_ids(&[&["a"], &["b"]]);
        let mut p = Fixed(vec![bad.clone(), bad, good]);
        let out = solve_reflective(&inst, &mut p, &mut Echo, 10, Constraints::for_instance(&inst)).unwrap();
        assert_eq!(out.rounds, 3);
        assert_eq!(out.memory.long.len(), 2);
        assert_eq!(out.memory.long[0].round, 1);
        assert!(out.memory.long[0]
            .text
            .contains("station 1 load 8 s exceeds the limit by 3 s"));
    }

    #[test]
    fn exhaustion_returns_least_bad_proposal() {
        let inst = pair(4.0);
        let mut p = Fixed(vec![
            Assignment::from_ids(&[&["a", "b"], &[]]),
            Assignment::from_ids(&[&["a"], &["b"]]),
        ]);
        let out = solve_reflective(&inst, &mut p, &mut Echo, 4, Constraints::for_instance(&inst)).unwrap();
        assert!(!out.feasible);
        assert_eq!(out.rounds, 4);
        assert_eq!(out.memory.long.len(), 4);
        assert_eq!(out.report.ct, 4.0);
        assert_eq!(out.report.nitc, None);
    }

    #[test]
    fn malformed_proposals_are_reflected_on() {
        let inst = pair(5.0);
        let mut p = Fixed(vec![
            Assignment::from_ids(&[&["a"], &[]]),
            Assignment::from_ids(&[&["a"], &["b"]]),
        ]);
        let out = solve_reflective(&inst, &mut p, &mut Echo, 5, Constraints::for_instance(&inst)).unwrap();
        assert_eq!(out.rounds, 2);
        assert!(out.memory.long[0].text.contains("task `b` is not assigned"));
    }

    #[test]
    fn sequential_fill_respects_limit() {
        let tasks: Vec<_> = (0..4)
            .map(|i| BalanceTask::new(format!("t{i}"), 3.0, Vec::<String>::new()))
            .collect();
        let inst = BalanceInstance::new(tasks, 3, Some(7.0)).unwrap();
        assert_eq!(sequential_fill(&inst), vec![0, 0, 1, 1]);
    }

    #[test]
    fn edit_display() {
        let e = Edit::Move {
            task: "3".into(),
            from: 5,
            to: 4,
        };
        assert_eq!(e.to_string(), "move task 3 from station 5 to station 4");
    }
}
