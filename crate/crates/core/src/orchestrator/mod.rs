//! The planning loop: reason about which fact is missing, call the agent
//! that supplies it, record the observation, and finish with a
//! station-allocated subtask list.

mod conflict;
mod plan;
mod subtasks;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{FewShotConfig, TransportError};
use crate::linebalance::{Assignment, BalanceReport};
use crate::scenegraph::Located;

pub use conflict::{handle_conflict, ConflictOutcome, ConflictState, InfeasibilityVerdict};
pub use plan::{plan, step, Agents, PlanFailure};
pub use subtasks::{
    expand_subtasks, label_subtasks, render_plan, Label, LocationRef, Subtask, SubtaskList, SubtaskVerb,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactFlags {
    pub process_known: bool,
    pub times_known: bool,
    pub balance_solved: bool,
    pub requirements_known: bool,
    pub locations_known: bool,
}

impl FactFlags {
    pub fn all(&self) -> bool {
        self.process_known && self.times_known && self.balance_solved && self.requirements_known && self.locations_known
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeNeed {
    Procedure,
    Times,
    Requirements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTarget {
    KnowledgeAgent,
    LineBalanceAgent,
    SceneGraph,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum AgentAction {
    KnowledgeAgent {
        query: String,
        need: KnowledgeNeed,
    },
    LineBalanceAgent {
        stations: usize,
        ct_limit: f64,
    },
    SceneGraph {
        query: String,
    },
    /// Chosen with `subtasks: None`; filled in once the list is built.
    Final {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subtasks: Option<Box<SubtaskList>>,
    },
}

impl AgentAction {
    pub fn target(&self) -> ActionTarget {
        match self {
            AgentAction::KnowledgeAgent { .. } => ActionTarget::KnowledgeAgent,
            AgentAction::LineBalanceAgent { .. } => ActionTarget::LineBalanceAgent,
            AgentAction::SceneGraph { .. } => ActionTarget::SceneGraph,
            AgentAction::Final { .. } => ActionTarget::Final,
        }
    }

    /// Checks the action against what the planner already knows.
    pub fn check(&self, snap: &StateSnapshot) -> Result<(), String> {
        match self {
            AgentAction::KnowledgeAgent { query, need } => {
                if query.trim().is_empty() {
                    return Err("knowledge query is empty".into());
                }
                if *need != KnowledgeNeed::Procedure && !snap.flags.process_known {
                    return Err("process chain must be retrieved first".into());
                }
                Ok(())
            }
            AgentAction::LineBalanceAgent { stations, ct_limit } => {
                if !(snap.flags.process_known && snap.flags.times_known) {
                    return Err("balancing needs the process chain and times".into());
                }
                if *stations == 0 || ct_limit.is_nan() || *ct_limit <= 0.0 {
                    return Err("balancing needs a positive station count and limit".into());
                }
                Ok(())
            }
            AgentAction::SceneGraph { query } => {
                if query.trim().is_empty() {
                    return Err("scene query is empty".into());
                }
                if !snap.flags.requirements_known {
                    return Err("locations need the requirement list first".into());
                }
                Ok(())
            }
            AgentAction::Final { .. } => {
                if snap.flags.all() {
                    Ok(())
                } else {
                    Err("final action before every fact is known".into())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerDecision {
    pub thought: String,
    pub action: AgentAction,
}

/// What a reasoner sees when choosing the next action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub t: usize,
    pub instruction: String,
    pub product: Option<String>,
    pub flags: FactFlags,
    pub stations: usize,
    pub ct_limit: f64,
    pub last_observation: Option<String>,
    #[serde(skip)]
    pub few_shot: FewShotConfig,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasonerError {
    #[error("reasoner returned a malformed action: {0}")]
    Malformed(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

pub trait Reasoner {
    fn decide(&mut self, snap: &StateSnapshot) -> Result<ReasonerDecision, ReasonerError>;
}

/// One loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub thought: String,
    pub action: AgentAction,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedProduct {
    pub id: String,
    pub name: String,
}

/// Everything known about one process step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessFacts {
    pub id: String,
    pub name: String,
    /// 1-based position in the product's process chain.
    pub step: usize,
    pub verb: String,
    pub duration_s: Option<f64>,
    pub predecessors: Vec<String>,
    pub parts: Vec<String>,
    pub tools: Vec<String>,
    pub reference_part: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Artifacts {
    pub product: Option<ResolvedProduct>,
    pub processes: Vec<ProcessFacts>,
    pub assignment: Option<Assignment>,
    pub balance: Option<BalanceReport>,
    /// Scene instances per catalog id.
    pub locations: BTreeMap<String, Vec<Located>>,
    /// Scene workstation id per station, station 1 first.
    pub workstations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub ct_limit: f64,
    /// Station count; defaults to the scene's workstation count.
    pub stations: Option<usize>,
    pub max_iterations: usize,
    pub max_rounds: usize,
    pub conflict_retries: usize,
    pub k: usize,
    #[serde(skip)]
    pub few_shot: FewShotConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            ct_limit: 250.0,
            stations: None,
            max_iterations: 50,
            max_rounds: 20,
            conflict_retries: 2,
            k: crate::retrieval::DEFAULT_K,
            few_shot: FewShotConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub t: usize,
    pub instruction: String,
    pub trace: Vec<TraceRecord>,
    pub flags: FactFlags,
    pub artifacts: Artifacts,
    pub conflict: ConflictState,
    pub config: PlanConfig,
    /// Workstations available in the scene.
    pub station_supply: usize,
    pub result: Option<SubtaskList>,
}

impl PlannerState {
    pub fn new(instruction: impl Into<String>, config: PlanConfig, station_supply: usize) -> Self {
        let stations = config.stations.unwrap_or(station_supply);
        PlannerState {
            t: 0,
            instruction: instruction.into(),
            trace: Vec::new(),
            flags: FactFlags::default(),
            artifacts: Artifacts::default(),
            conflict: ConflictState::new(stations),
            config,
            station_supply,
            result: None,
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            t: self.t,
            instruction: self.instruction.clone(),
            product: self.artifacts.product.as_ref().map(|p| p.name.clone()),
            flags: self.flags,
            stations: self.conflict.stations,
            ct_limit: self.config.ct_limit,
            last_observation: self.trace.last().map(|r| r.observation.clone()),
            few_shot: self.config.few_shot.clone(),
        }
    }

    /// The trace as JSON lines, one record per iteration.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.trace {
            out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unknown product for instruction {instruction:?}; candidates tried: {}", candidates.join(", "))]
    UnknownProduct {
        instruction: String,
        candidates: Vec<String>,
    },
    #[error("no plan after {0} iterations")]
    IterationCap(usize),
    #[error("{0}")]
    Infeasible(InfeasibilityVerdict),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("knowledge agent: {0}")]
    Knowledge(String),
    #[error("scene graph: {0}")]
    Scene(String),
    #[error("configuration: {0}")]
    Config(String),
}
