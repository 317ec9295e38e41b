use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PlanError, PlannerState};
use crate::linebalance::{evaluate_feedback, lower_bound_ct, BalanceReport};

/// Backtracking bookkeeping for the balancing branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictState {
    /// Station count the next balancing call uses.
    pub stations: usize,
    /// Failed solves at the current station count.
    pub retries: usize,
    /// Violation summaries from every failed solve so far.
    pub evidence: Vec<String>,
    pub verdict: Option<InfeasibilityVerdict>,
}

impl ConflictState {
    pub fn new(stations: usize) -> Self {
        ConflictState {
            stations,
            retries: 0,
            evidence: Vec::new(),
            verdict: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityVerdict {
    pub stations_max: usize,
    pub total_work: f64,
    pub lower_bound_ct: f64,
    pub ct_limit: f64,
    pub evidence: Vec<String>,
}

impl fmt::Display for InfeasibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower_bound_ct >= self.ct_limit {
            write!(
                f,
                "infeasible: with at most {} stations the cycle time is at least {} s, not below the {} s limit",
                self.stations_max, self.lower_bound_ct, self.ct_limit
            )
        } else {
            write!(
                f,
                "no assignment below the {} s limit found on up to {} stations (lower bound {} s)",
                self.ct_limit, self.stations_max, self.lower_bound_ct
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ConflictOutcome {
    /// Solve again at the same station count with the evidence folded in.
    Retry {
        attempt: usize,
    },
    /// Solve again with one more station.
    Escalate {
        stations: usize,
    },
    Verdict(InfeasibilityVerdict),
}

/// Backtracking after an infeasible balance: retry with evidence, then add
/// stations up to the scene's supply, then give a terminal verdict. Always
/// clears `balance_solved`.
pub fn handle_conflict(state: &mut PlannerState, report: &BalanceReport) -> Result<ConflictOutcome, PlanError> {
    if report.feasible {
        return Err(PlanError::Config(
            "handle_conflict called with a feasible report".into(),
        ));
    }
    state.flags.balance_solved = false;
    state.artifacts.assignment = None;
    let summary = format!("m={}: {}", state.conflict.stations, evaluate_feedback(report).summary());
    state.conflict.evidence.push(summary);

    let c = &mut state.conflict;
    let outcome = if c.retries < state.config.conflict_retries {
        c.retries += 1;
        ConflictOutcome::Retry { attempt: c.retries }
    } else if c.stations < state.station_supply {
        c.stations += 1;
        c.retries = 0;
        ConflictOutcome::Escalate { stations: c.stations }
    } else {
        let total: f64 = report.loads.iter().sum();
        let longest = state
            .artifacts
            .processes
            .iter()
            .filter_map(|p| p.duration_s)
            .fold(0.0, f64::max);
        let stations_max = c.stations.max(state.station_supply);
        let verdict = InfeasibilityVerdict {
            stations_max,
            total_work: total,
            lower_bound_ct: lower_bound_ct(total, stations_max, longest),
            ct_limit: state.config.ct_limit,
            evidence: c.evidence.clone(),
        };
        c.verdict = Some(verdict.clone());
        ConflictOutcome::Verdict(verdict)
    };
    tracing::info!(?outcome, "balancing conflict handled");
    Ok(outcome)
}
