//! Precedence-constrained line balancing with a fixed station count.
//!
//! Three solvers share one evaluator: an exact branch-and-bound
//! ([`solve_oracle`]), seeded simulated annealing ([`solve_baseline`]) and the
//! propose/evaluate/reflect loop ([`solve_reflective`]).

mod anneal;
mod instance;
mod oracle;
mod reflective;
mod report;

pub use anneal::{rpw_greedy, solve_baseline, solve_baseline_from, AnnealConfig, BaselineResult};
pub use instance::{lower_bound_ct, precedence_violations, Assignment, BalanceInstance, BalanceTask};
pub use oracle::{solve_oracle, OracleResult, ORACLE_MAX_TASKS};
pub use reflective::{
    evaluate_feedback, legal_station_range, sequential_fill, solve_reflective, ActorInput, Constraints, Edit,
    Evaluation, Proposer, ProposerError, Reflection, ReflectiveMemory, ReflectiveOutcome, Reflector, ShortMemory,
    StationOverload,
};
pub use report::{evaluate, render_table, tool_changes, BalanceReport, Violation};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("assignment references unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` is assigned more than once")]
    DuplicateTask(String),
    #[error("task `{0}` is not assigned")]
    Unassigned(String),
    #[error("assignment uses {got} stations but the instance has {expected}")]
    StationCount { expected: usize, got: usize },
    #[error("instance has {tasks} tasks; the exact solver accepts at most {bound}")]
    TooLarge { tasks: usize, bound: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("{path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}
