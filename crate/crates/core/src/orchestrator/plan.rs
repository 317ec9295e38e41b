use std::collections::BTreeSet;

use super::conflict::{handle_conflict, ConflictOutcome};
use super::subtasks::{expand_subtasks, SubtaskList};
use super::{
    AgentAction, KnowledgeNeed, PlanConfig, PlanError, PlannerState, ProcessFacts, Reasoner, ReasonerError,
    ResolvedProduct, TraceRecord,
};
use crate::backend::embed::tokenize;
use crate::backend::scripted::{ScriptedProposer, ScriptedReasoner, ScriptedReflector};
use crate::kgraph::{attr, EntityKind, KnowledgeGraph, RelationLabel};
use crate::linebalance::{
    solve_reflective, BalanceInstance, BalanceTask, Constraints, Proposer, ProposerError, Reflector,
};
use crate::retrieval::{KnowledgeAgent, Query, Retrieval, RetrievalError};
use crate::scenegraph::SceneGraph;

/// The reasoner plus the balancing agent's Actor and reflector.
pub struct Agents<'a> {
    pub reasoner: Box<dyn Reasoner + 'a>,
    pub proposer: Box<dyn Proposer + 'a>,
    pub reflector: Box<dyn Reflector + 'a>,
}

impl Agents<'static> {
    pub fn scripted() -> Self {
        Agents {
            reasoner: Box::new(ScriptedReasoner),
            proposer: Box::new(ScriptedProposer),
            reflector: Box::new(ScriptedReflector),
        }
    }
}

/// A failed run with the state reached, trace included.
#[derive(Debug)]
pub struct PlanFailure {
    pub error: PlanError,
    pub state: Box<PlannerState>,
}

impl std::fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.state.t)
    }
}

impl std::error::Error for PlanFailure {}

/// Runs the loop until the final action or the iteration cap.
pub fn plan(
    instruction: &str,
    kg: &KnowledgeGraph,
    sg: &SceneGraph,
    config: PlanConfig,
    agents: &mut Agents<'_>,
) -> Result<(SubtaskList, PlannerState), PlanFailure> {
    let workstations: Vec<String> = sg.workstations().iter().map(|n| n.id.clone()).collect();
    let supply = workstations.len();
    let mut state = PlannerState::new(instruction, config, supply);
    state.artifacts.workstations = workstations;
    let fail = |error, state: PlannerState| PlanFailure {
        error,
        state: Box::new(state),
    };
    if supply == 0 {
        return Err(fail(PlanError::Config("scene has no workstations".into()), state));
    }
    if state.conflict.stations == 0 || state.conflict.stations > supply {
        let msg = format!(
            "{} stations requested but the scene has {supply}",
            state.conflict.stations
        );
        return Err(fail(PlanError::Config(msg), state));
    }
    let ka = KnowledgeAgent::with_k(kg, state.config.k);
    while state.t < state.config.max_iterations {
        match step(&mut state, agents, &ka, sg) {
            Ok(AgentAction::Final { subtasks: Some(list) }) => return Ok((*list, state)),
            Ok(_) => {
                if let Some(verdict) = state.conflict.verdict.clone() {
                    return Err(fail(PlanError::Infeasible(verdict), state));
                }
            }
            Err(error) => return Err(fail(error, state)),
        }
    }
    let cap = state.config.max_iterations;
    Err(fail(PlanError::IterationCap(cap), state))
}

/// One reason/act/observe iteration. Appends exactly one trace record, also
/// when the action fails.
pub fn step(
    state: &mut PlannerState,
    agents: &mut Agents<'_>,
    ka: &KnowledgeAgent<'_>,
    sg: &SceneGraph,
) -> Result<AgentAction, PlanError> {
    state.t += 1;
    let snap = state.snapshot();
    let decision = agents.reasoner.decide(&snap)?;
    if let Err(reason) = decision.action.check(&snap) {
        state.trace.push(TraceRecord {
            t: state.t,
            thought: decision.thought,
            action: decision.action,
            observation: format!("rejected: {reason}"),
        });
        return Err(ReasonerError::Malformed(reason).into());
    }
    let recorded = decision.action.clone();
    let result = execute(state, decision.action, agents, ka, sg);
    let observation = match &result {
        Ok((_, obs)) => obs.clone(),
        Err(e) => format!("error: {e}"),
    };
    tracing::debug!(t = state.t, target = ?recorded.target(), %observation, "planner step");
    state.trace.push(TraceRecord {
        t: state.t,
        thought: decision.thought,
        action: recorded,
        observation,
    });
    result.map(|(action, _)| action)
}

fn execute(
    state: &mut PlannerState,
    action: AgentAction,
    agents: &mut Agents<'_>,
    ka: &KnowledgeAgent<'_>,
    sg: &SceneGraph,
) -> Result<(AgentAction, String), PlanError> {
    let kg = ka.graph();
    let obs = match &action {
        AgentAction::KnowledgeAgent { query, need } => match need {
            KnowledgeNeed::Procedure => retrieve_procedure(state, ka, query)?,
            KnowledgeNeed::Times => retrieve_times(state, kg)?,
            KnowledgeNeed::Requirements => retrieve_requirements(state, kg)?,
        },
        AgentAction::LineBalanceAgent { stations, ct_limit } => balance(state, agents, *stations, *ct_limit)?,
        AgentAction::SceneGraph { .. } => locate_resources(state, sg)?,
        AgentAction::Final { .. } => {
            let list = expand_subtasks(&state.artifacts, sg)?;
            let obs = format!(
                "plan ready: {} subtasks for {} processes on {} stations",
                list.subtasks.len(),
                state.artifacts.processes.len(),
                list.stations
            );
            state.result = Some(list.clone());
            return Ok((
                AgentAction::Final {
                    subtasks: Some(Box::new(list)),
                },
                obs,
            ));
        }
    };
    Ok((action, obs))
}

const STOPWORDS: [&str; 22] = [
    "a",
    "an",
    "the",
    "one",
    "two",
    "of",
    "for",
    "to",
    "and",
    "with",
    "in",
    "on",
    "please",
    "assemble",
    "assembly",
    "build",
    "make",
    "product",
    "unit",
    "procedure",
    "retrieve",
    "me",
];

fn content_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Highest-ranked product candidate sharing a content word with the
/// instruction: first among the top-k candidates, then among products
/// reached by expansion.
fn resolve_product(
    instruction: &str,
    retrieval: &Retrieval,
    kg: &KnowledgeGraph,
) -> Result<ResolvedProduct, PlanError> {
    let wanted = content_tokens(instruction);
    let mut ordered: Vec<&str> = retrieval
        .candidates
        .ids()
        .filter(|id| kg.entity(id).is_some_and(|e| e.kind == EntityKind::Product))
        .collect();
    for (id, e) in &retrieval.subgraph.entities {
        if e.kind == EntityKind::Product && !ordered.contains(&id.as_str()) {
            ordered.push(id);
        }
    }
    for id in &ordered {
        let e = kg.entity(id).expect("candidate ids come from the graph");
        let mut tokens = content_tokens(&e.search_text());
        tokens.extend(content_tokens(&e.id));
        if !wanted.is_disjoint(&tokens) {
            return Ok(ResolvedProduct {
                id: e.id.clone(),
                name: e.name.clone(),
            });
        }
    }
    Err(PlanError::UnknownProduct {
        instruction: instruction.to_string(),
        candidates: ordered
            .iter()
            .map(|id| kg.entity(id).map_or_else(|| id.to_string(), |e| e.name.clone()))
            .collect(),
    })
}

fn retrieve_procedure(state: &mut PlannerState, ka: &KnowledgeAgent<'_>, query: &str) -> Result<String, PlanError> {
    let q = Query::at_turn(query, state.t).map_err(knowledge)?;
    let retrieval = ka.two_layer(&q).map_err(knowledge)?;
    let kg = ka.graph();
    let product = resolve_product(&state.instruction, &retrieval, kg)?;
    let chain = kg
        .product_chain(&product.id)
        .map_err(|e| PlanError::Knowledge(e.to_string()))?;
    state.artifacts.processes = chain
        .iter()
        .enumerate()
        .map(|(i, e)| ProcessFacts {
            id: e.id.clone(),
            name: e.name.clone(),
            step: i + 1,
            verb: e.text_attr(attr::VERB).unwrap_or("install").to_string(),
            duration_s: None,
            predecessors: Vec::new(),
            parts: Vec::new(),
            tools: Vec::new(),
            reference_part: None,
        })
        .collect();
    let names: Vec<&str> = chain.iter().map(|e| e.name.as_str()).collect();
    let obs = format!(
        "{} ({}) has {} steps: {}",
        product.name,
        product.id,
        names.len(),
        names.join(" -> ")
    );
    state.artifacts.product = Some(product);
    state.flags.process_known = true;
    Ok(obs)
}

fn retrieve_times(state: &mut PlannerState, kg: &KnowledgeGraph) -> Result<String, PlanError> {
    let mut parts = Vec::new();
    let mut prev: Option<String> = None;
    for p in &mut state.artifacts.processes {
        let e = kg
            .entity(&p.id)
            .ok_or_else(|| PlanError::Knowledge(format!("process {} vanished", p.id)))?;
        let t = e
            .time_seconds()
            .ok_or_else(|| PlanError::Knowledge(format!("process {} has no time", p.id)))?;
        p.duration_s = Some(t);
        p.predecessors = match e.text_attr(attr::PREDECESSORS) {
            Some(list) => list.split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
            None => prev.iter().cloned().collect(),
        };
        prev = Some(p.id.clone());
        parts.push(format!("step {} {} s", p.step, t));
    }
    state.flags.times_known = true;
    Ok(format!("processing times: {}", parts.join(", ")))
}

fn balance(
    state: &mut PlannerState,
    agents: &mut Agents<'_>,
    stations: usize,
    ct_limit: f64,
) -> Result<String, PlanError> {
    let tasks: Vec<BalanceTask> = state
        .artifacts
        .processes
        .iter()
        .map(|p| BalanceTask {
            id: p.id.clone(),
            duration_s: p.duration_s.unwrap_or(0.0),
            predecessors: p.predecessors.iter().cloned().collect(),
            tool: None,
        })
        .collect();
    let inst =
        BalanceInstance::new(tasks, stations, Some(ct_limit)).map_err(|e| PlanError::Knowledge(e.to_string()))?;
    let constraints = Constraints {
        evidence: state.conflict.evidence.clone(),
        attempt: state.conflict.retries,
        ..Constraints::for_instance(&inst)
    };
    let outcome = solve_reflective(
        &inst,
        agents.proposer.as_mut(),
        agents.reflector.as_mut(),
        state.config.max_rounds,
        constraints,
    )
    .map_err(|e| match e {
        ProposerError::Transport(t) => PlanError::Transport(t),
        ProposerError::Malformed(msg) => PlanError::Knowledge(msg),
    })?;
    let r = &outcome.report;
    let loads: Vec<String> = r.loads.iter().map(|l| l.to_string()).collect();
    if outcome.feasible {
        let obs = format!(
            "balanced on {stations} stations in {} rounds: CT {} s, LBR {:.1}%, loads [{}]",
            outcome.rounds,
            r.ct,
            r.lbr,
            loads.join(", ")
        );
        state.artifacts.assignment = Some(outcome.assignment);
        state.artifacts.balance = Some(outcome.report);
        state.flags.balance_solved = true;
        return Ok(obs);
    }
    let report = outcome.report.clone();
    let next = match handle_conflict(state, &report)? {
        ConflictOutcome::Retry { attempt } => {
            format!("retrying with violation evidence (attempt {attempt})")
        }
        ConflictOutcome::Escalate { stations } => format!("requesting {stations} stations"),
        ConflictOutcome::Verdict(v) => v.to_string(),
    };
    state.artifacts.balance = Some(report);
    Ok(format!(
        "no assignment below {ct_limit} s on {stations} stations after {} rounds (best CT {} s); {next}",
        outcome.rounds, r.ct
    ))
}

fn retrieve_requirements(state: &mut PlannerState, kg: &KnowledgeGraph) -> Result<String, PlanError> {
    let mut lines = Vec::new();
    for p in &mut state.artifacts.processes {
        p.parts = kg
            .outgoing(&p.id, RelationLabel::RequiresPart)
            .map(|r| r.dst.clone())
            .collect();
        p.tools = kg
            .outgoing(&p.id, RelationLabel::RequiresTool)
            .map(|r| r.dst.clone())
            .collect();
        p.reference_part = kg
            .incoming(&p.id, RelationLabel::ReferencePartOf)
            .map(|r| r.src.clone())
            .next();
        let list = |v: &[String]| {
            if v.is_empty() {
                "none".to_string()
            } else {
                v.join(", ")
            }
        };
        lines.push(format!(
            "step {}: parts {}; tools {}",
            p.step,
            list(&p.parts),
            list(&p.tools)
        ));
    }
    state.flags.requirements_known = true;
    Ok(lines.join(" | "))
}

fn locate_resources(state: &mut PlannerState, sg: &SceneGraph) -> Result<String, PlanError> {
    let wanted: BTreeSet<String> = state
        .artifacts
        .processes
        .iter()
        .flat_map(|p| p.parts.iter().chain(p.tools.iter()).cloned())
        .collect();
    let mut lines = Vec::new();
    for id in wanted {
        let found = sg.locate(&id);
        if found.is_empty() {
            return Err(PlanError::Scene(format!("no instance of {id} in the scene")));
        }
        let places: Vec<String> = found.iter().map(|l| sg.path_names(&l.path[1..]).join(" in ")).collect();
        lines.push(format!("{id}: {}", places.join(" or ")));
        state.artifacts.locations.insert(id, found);
    }
    state.flags.locations_known = true;
    Ok(lines.join(" | "))
}

fn knowledge(e: RetrievalError) -> PlanError {
    match e {
        RetrievalError::Transport(t) => PlanError::Transport(t),
        other => PlanError::Knowledge(other.to_string()),
    }
}
