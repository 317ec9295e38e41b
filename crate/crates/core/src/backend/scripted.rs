//! Deterministic providers: the reasoner follows the fixed branch order, the
//! balancing Actor and reflector do local search over station moves and
//! swaps, and the synthesizer answers the six question templates by walking
//! the retrieved subgraph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use regex::Regex;

use crate::kgraph::{attr, EntityKind, RelationLabel, Subgraph};
use crate::linebalance::{
    legal_station_range, rpw_greedy, sequential_fill, ActorInput, Assignment, BalanceInstance, Constraints, Edit,
    Proposer, ProposerError, Reflection, Reflector, ShortMemory,
};
use crate::orchestrator::{AgentAction, KnowledgeNeed, Reasoner, ReasonerDecision, ReasonerError, StateSnapshot};
use crate::retrieval::{Answer, AnswerStatus, Query, Retrieval, RetrievalError, Synthesizer};

/// Next action in fixed order: procedure, times, balance, requirements,
/// locations, final.
pub fn scripted_decide(snap: &StateSnapshot) -> ReasonerDecision {
    let f = &snap.flags;
    let product = snap.product.as_deref().unwrap_or("the requested product");
    let (thought, action) = if !f.process_known {
        (
            "The assembly procedure is unknown; ask the knowledge agent for it.".to_string(),
            AgentAction::KnowledgeAgent {
                query: format!("Retrieve assembly procedure for {}", snap.instruction),
                need: KnowledgeNeed::Procedure,
            },
        )
    } else if !f.times_known {
        (
            format!("Processing times for {product} are unknown; ask the knowledge agent."),
            AgentAction::KnowledgeAgent {
                query: format!("Retrieve processing time of each step of {product}"),
                need: KnowledgeNeed::Times,
            },
        )
    } else if !f.balance_solved {
        (
            format!(
                "Steps and times are known; call the line balance agent for {} stations below {} s.",
                snap.stations, snap.ct_limit
            ),
            AgentAction::LineBalanceAgent {
                stations: snap.stations,
                ct_limit: snap.ct_limit,
            },
        )
    } else if !f.requirements_known {
        (
            "The line is balanced; ask the knowledge agent which parts and tools each step needs.".to_string(),
            AgentAction::KnowledgeAgent {
                query: format!("Retrieve tools and parts required by each step of {product}"),
                need: KnowledgeNeed::Requirements,
            },
        )
    } else if !f.locations_known {
        (
            "Requirements are known; look up where the tools and parts are.".to_string(),
            AgentAction::SceneGraph {
                query: "Retrieve location of tools and parts".to_string(),
            },
        )
    } else {
        (
            "Every fact is known; emit the subtask list.".to_string(),
            AgentAction::Final { subtasks: None },
        )
    };
    ReasonerDecision { thought, action }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedReasoner;

impl Reasoner for ScriptedReasoner {
    fn decide(&mut self, snap: &StateSnapshot) -> Result<ReasonerDecision, ReasonerError> {
        Ok(scripted_decide(snap))
    }
}

/// Ordering used to rank candidate assignments, smaller is better.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    precedence: usize,
    excess: f64,
    violating: usize,
    ct: f64,
    spread: f64,
}

impl Score {
    fn cmp(&self, other: &Score) -> Ordering {
        self.precedence
            .cmp(&other.precedence)
            .then(self.excess.total_cmp(&other.excess))
            .then(self.violating.cmp(&other.violating))
            .then(self.ct.total_cmp(&other.ct))
            .then(self.spread.total_cmp(&other.spread))
    }
}

fn loads_of(inst: &BalanceInstance, station_of: &[usize]) -> Vec<f64> {
    let mut loads = vec![0.0; inst.stations()];
    for (i, &s) in station_of.iter().enumerate() {
        loads[s] += inst.duration(i);
    }
    loads
}

fn score(inst: &BalanceInstance, station_of: &[usize]) -> Score {
    let loads = loads_of(inst, station_of);
    let precedence = (0..inst.len())
        .map(|j| inst.preds(j).iter().filter(|&&p| station_of[p] > station_of[j]).count())
        .sum();
    let limit = inst.ct_limit().unwrap_or(f64::INFINITY);
    let over: Vec<f64> = loads
        .iter()
        .filter(|&&l| !inst.within_limit(l))
        .map(|l| l - limit)
        .collect();
    Score {
        precedence,
        excess: over.iter().sum(),
        violating: over.len(),
        ct: loads.iter().copied().fold(0.0, f64::max),
        spread: loads.iter().map(|l| l * l).sum(),
    }
}

fn legal(inst: &BalanceInstance, station_of: &[usize]) -> bool {
    (0..inst.len()).all(|j| inst.preds(j).iter().all(|&p| station_of[p] <= station_of[j]))
}

/// Every legal single-task move and pairwise swap touching `stations`
/// (0-based), best resulting score first.
fn ranked_edits(inst: &BalanceInstance, station_of: &[usize], stations: &BTreeSet<usize>) -> Vec<(Edit, Score)> {
    let mut out = Vec::new();
    let order = inst.topo_order();
    for &i in order {
        let s = station_of[i];
        if !stations.contains(&s) {
            continue;
        }
        let (lo, hi) = legal_station_range(inst, station_of, i);
        for t in lo..=hi {
            if t == s {
                continue;
            }
            let mut v = station_of.to_vec();
            v[i] = t;
            out.push((
                Edit::Move {
                    task: inst.id(i).to_string(),
                    from: s + 1,
                    to: t + 1,
                },
                score(inst, &v),
            ));
        }
        for &j in order {
            let t = station_of[j];
            if t == s || (stations.contains(&t) && t < s) {
                continue;
            }
            let mut v = station_of.to_vec();
            v.swap(i, j);
            if legal(inst, &v) {
                out.push((
                    Edit::Swap {
                        a: inst.id(i).to_string(),
                        a_from: s + 1,
                        b: inst.id(j).to_string(),
                        b_from: t + 1,
                    },
                    score(inst, &v),
                ));
            }
        }
    }
    // Stable sort keeps topological discovery order among equal scores.
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

/// Self-reflection over the latest proposal.
///
/// Names the most-overloaded station, its overload and the tasks there that
/// are no longer than the overload and can legally leave. Suggests moving
/// the longest of those to the least-loaded legal station; failing that, the
/// best swap that shifts work off the station; failing that, the best move.
pub fn scripted_reflect(inst: &BalanceInstance, short: &ShortMemory, constraints: &Constraints) -> Reflection {
    let eval = &short.evaluation;
    if eval.feasible {
        return Reflection::default();
    }
    if let Some(reason) = &eval.malformed {
        return Reflection {
            text: format!(
                "The proposal could not be evaluated ({reason}). Assign every task exactly once across {} stations.",
                constraints.stations
            ),
            ..Default::default()
        };
    }
    let Ok(station_of) = inst.station_vector(&short.assignment) else {
        return Reflection {
            text: "The proposal does not cover the task set.".into(),
            ..Default::default()
        };
    };
    if !eval.precedence.is_empty() {
        let mut edits = Vec::new();
        let mut notes = Vec::new();
        for (p, s) in &eval.precedence {
            let (Some(pi), Some(si)) = (inst.task_index(p), inst.task_index(s)) else {
                continue;
            };
            if station_of[pi] > station_of[si] {
                edits.push(Edit::Move {
                    task: s.clone(),
                    from: station_of[si] + 1,
                    to: station_of[pi] + 1,
                });
                notes.push(format!("task {s} runs before its predecessor {p}"));
            } else {
                notes.push(format!(
                    "task {p} must come before task {s} within station {}",
                    station_of[pi] + 1
                ));
            }
        }
        let suggested = edits.first().cloned();
        let text = match &suggested {
            Some(e) => format!("Precedence broken: {}. Suggest: {e}.", notes.join("; ")),
            None => format!("Precedence broken: {}. Reorder those stations.", notes.join("; ")),
        };
        return Reflection {
            text,
            suggested,
            alternatives: edits.into_iter().skip(1).collect(),
            ..Default::default()
        };
    }
    let Some(worst) = eval.overloads.first() else {
        return Reflection::default();
    };
    let s0 = worst.station - 1;
    let loads = loads_of(inst, &station_of);
    let limit = constraints.ct_limit.or(inst.ct_limit()).unwrap_or(f64::INFINITY);

    let mut movable: Vec<usize> = inst
        .topo_order()
        .iter()
        .copied()
        .filter(|&i| station_of[i] == s0 && inst.duration(i) <= worst.overload)
        .filter(|&i| {
            let (lo, hi) = legal_station_range(inst, &station_of, i);
            lo < s0 || hi > s0
        })
        .collect();
    movable.sort_by(|&a, &b| inst.duration(b).total_cmp(&inst.duration(a)));

    let overloaded: BTreeSet<usize> = eval.overloads.iter().map(|o| o.station - 1).collect();
    let ranked = ranked_edits(inst, &station_of, &overloaded);
    let suggested = if let Some(&task) = movable.first() {
        let (lo, hi) = legal_station_range(inst, &station_of, task);
        let dest = (lo..=hi)
            .filter(|&t| t != s0)
            .min_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(a.cmp(&b)))
            .expect("movable tasks have a destination");
        Some(Edit::Move {
            task: inst.id(task).to_string(),
            from: s0 + 1,
            to: dest + 1,
        })
    } else {
        let relieving_swap = ranked.iter().find(|(e, _)| match e {
            Edit::Swap { a, a_from, b, .. } => {
                *a_from == s0 + 1
                    && inst.duration(inst.task_index(a).unwrap()) > inst.duration(inst.task_index(b).unwrap())
            }
            Edit::Move { .. } => false,
        });
        relieving_swap
            .or_else(|| {
                ranked
                    .iter()
                    .find(|(e, _)| matches!(e, Edit::Move { from, .. } if *from == s0 + 1))
            })
            .or(ranked.first())
            .map(|(e, _)| e.clone())
    };
    let alternatives: Vec<Edit> = ranked
        .into_iter()
        .map(|(e, _)| e)
        .filter(|e| Some(e) != suggested.as_ref())
        .collect();

    let movable_ids: Vec<String> = movable.iter().map(|&i| inst.id(i).to_string()).collect();
    let movable_text = if movable_ids.is_empty() {
        "no task short enough to absorb it can leave".to_string()
    } else {
        format!("movable tasks: {}", movable_ids.join(", "))
    };
    let advice = match &suggested {
        Some(e @ Edit::Move { .. }) if !movable.is_empty() => {
            format!("{e}, the least-loaded legal station")
        }
        Some(e) => e.to_string(),
        None => "no legal edit relieves it; more stations are needed".to_string(),
    };
    Reflection {
        round: 0,
        text: format!(
            "Station {} carries {} s, {} s over the {} s limit; {}. Suggest: {}.",
            worst.station, worst.load, worst.overload, limit, movable_text, advice
        ),
        station: Some(worst.station),
        overload: Some(worst.overload),
        movable: movable_ids,
        suggested,
        alternatives,
        assignment: None,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedReflector;

impl Reflector for ScriptedReflector {
    fn reflect(&mut self, inst: &BalanceInstance, short: &ShortMemory, constraints: &Constraints) -> Reflection {
        scripted_reflect(inst, short, constraints)
    }
}

/// Actor that starts from a constructive assignment and then applies the
/// first reflected edit leading to a proposal not yet tried. Proposals
/// already tried are read back from long memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedProposer;

impl ScriptedProposer {
    fn start(inst: &BalanceInstance, attempt: usize) -> Vec<usize> {
        if attempt.is_multiple_of(2) {
            sequential_fill(inst)
        } else {
            rpw_greedy(inst)
        }
    }
}

impl Proposer for ScriptedProposer {
    fn propose(&mut self, input: &ActorInput<'_>) -> Result<Assignment, ProposerError> {
        let inst = input.instance;
        let tried: HashSet<Vec<usize>> = input
            .long
            .iter()
            .filter_map(|r| r.assignment.as_ref())
            .filter_map(|a| inst.station_vector(a).ok())
            .collect();
        let current = input
            .short
            .filter(|s| s.report.is_some())
            .and_then(|s| inst.station_vector(&s.assignment).ok());
        let Some(current) = current else {
            return Ok(inst.assignment_from_stations(&Self::start(inst, input.constraints.attempt)));
        };
        if let Some(reflection) = input.long.last() {
            for edit in reflection.suggested.iter().chain(reflection.alternatives.iter()) {
                let mut v = current.clone();
                if edit.apply(inst, &mut v) && legal(inst, &v) && !tried.contains(&v) {
                    return Ok(inst.assignment_from_stations(&v));
                }
            }
        }
        for attempt in [input.constraints.attempt, input.constraints.attempt + 1] {
            let v = Self::start(inst, attempt);
            if !tried.contains(&v) {
                return Ok(inst.assignment_from_stations(&v));
            }
        }
        Ok(inst.assignment_from_stations(&current))
    }
}

/// Answers the six question templates from the retrieved subgraph alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedSynthesizer;

struct Templates {
    overall: Regex,
    applicability: Regex,
    first_step: Regex,
    which_first: Regex,
    next_after_first: Regex,
    next_after: Regex,
    requirement: Regex,
    reference: Regex,
}

fn templates() -> &'static Templates {
    static T: OnceLock<Templates> = OnceLock::new();
    T.get_or_init(|| {
        let re = |p: &str| Regex::new(&format!("(?i)^{p}$")).expect("template regex");
        Templates {
            overall: re(r"what is the complete assembly process for (.+?)\?"),
            applicability: re(r#"which products require the "(.+?)" process for assembly\?"#),
            first_step: re(r"what is the first assembly step for (.+?)\?"),
            which_first: re(r#"which comes first in the assembly of (.+?), "(.+?)" or "(.+?)"\?"#),
            next_after_first: re(r"what is the next step after the first assembly process of (.+?)\?"),
            next_after: re(r#"what is the next step after "(.+?)" in the assembly of (.+?)\?"#),
            requirement: re(
                r"which components and tools are required for (?:the first assembly step|step (\d+)) of (.+?)\?",
            ),
            reference: re(r"in step (\d+)\b.*? during (.+?) assembly, which part serves as the reference component\?"),
        }
    })
}

fn normalize_question(text: &str) -> String {
    text.trim()
        .replace(['\u{201c}', '\u{201d}'], "\"")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Product in the subgraph named by `phrase`: an exact id token match wins,
/// otherwise the largest name-token overlap (ties to the lower id).
fn resolve_product<'a>(sub: &'a Subgraph, phrase: &str) -> Option<&'a str> {
    let tokens: BTreeSet<String> = crate::backend::embed::tokenize(phrase).into_iter().collect();
    let products: Vec<&str> = sub
        .entities
        .values()
        .filter(|e| e.kind == EntityKind::Product)
        .map(|e| e.id.as_str())
        .collect();
    if let Some(id) = products.iter().find(|id| tokens.contains(&id.to_lowercase())) {
        return Some(id);
    }
    products
        .iter()
        .map(|id| {
            let name: BTreeSet<String> = crate::backend::embed::tokenize(&sub.entities[*id].name)
                .into_iter()
                .collect();
            (name.intersection(&tokens).count(), *id)
        })
        .filter(|(n, _)| *n > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(a.1)))
        .map(|(_, id)| id)
}

/// Process ids of `product` in order, walking the subgraph only.
fn chain_in(sub: &Subgraph, product: &str) -> Option<Vec<String>> {
    let firsts: Vec<&str> = sub
        .incoming(product, RelationLabel::FirstStepOf)
        .map(|r| r.src.as_str())
        .collect();
    let [first] = firsts.as_slice() else {
        return None;
    };
    let mut chain = vec![first.to_string()];
    let mut seen: BTreeSet<String> = chain.iter().cloned().collect();
    loop {
        let cur = chain.last().expect("non-empty").clone();
        let next: Vec<&str> = sub
            .outgoing(&cur, RelationLabel::NextStep)
            .map(|r| r.dst.as_str())
            .collect();
        match next.as_slice() {
            [] => break,
            [n] if seen.insert(n.to_string()) => chain.push(n.to_string()),
            _ => return None,
        }
    }
    let members = sub
        .incoming(product, RelationLabel::BelongsToProduct)
        .filter(|r| sub.entities.get(&r.src).is_some_and(|e| e.kind == EntityKind::Process))
        .count();
    (members == chain.len()).then_some(chain)
}

fn name_of(sub: &Subgraph, id: &str) -> String {
    sub.entities.get(id).map_or_else(|| id.to_string(), |e| e.name.clone())
}

fn list_or_none(mut names: Vec<String>) -> String {
    names.sort();
    if names.is_empty() {
        "none".into()
    } else {
        names.join(", ")
    }
}

impl ScriptedSynthesizer {
    fn product_chain(sub: &Subgraph, phrase: &str) -> Option<(String, Vec<String>)> {
        let product = resolve_product(sub, phrase)?;
        let chain = chain_in(sub, product)?;
        Some((product.to_string(), chain))
    }

    fn answer_text(&self, q: &str, sub: &Subgraph) -> Result<Answer, AnswerStatus> {
        let t = templates();
        let not_in_context = AnswerStatus::NotInContext;
        let names = |ids: &[String]| ids.iter().map(|id| name_of(sub, id)).collect::<Vec<_>>();
        let with = |text: String, product: &str, ids: &[String]| {
            let mut cited = vec![product.to_string()];
            cited.extend(ids.iter().cloned());
            Ok(Answer::answered(text, cited))
        };

        if let Some(c) = t.overall.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[1]).ok_or(not_in_context)?;
            return with(names(&chain).join(" -> "), &p, &chain);
        }
        if let Some(c) = t.applicability.captures(q) {
            let wanted = c[1].to_lowercase();
            let mut products: BTreeMap<String, String> = BTreeMap::new();
            let mut cited = Vec::new();
            for e in sub.entities.values() {
                if e.kind == EntityKind::Process && e.name.to_lowercase() == wanted {
                    for r in sub.outgoing(&e.id, RelationLabel::BelongsToProduct) {
                        products.insert(name_of(sub, &r.dst), r.dst.clone());
                        cited.push(e.id.clone());
                        cited.push(r.dst.clone());
                    }
                }
            }
            if products.is_empty() {
                return Ok(Answer::answered("None", Vec::new()));
            }
            cited.sort();
            cited.dedup();
            let text = products.keys().cloned().collect::<Vec<_>>().join(", ");
            return Ok(Answer::answered(text, cited));
        }
        if let Some(c) = t.first_step.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[1]).ok_or(not_in_context)?;
            return with(name_of(sub, &chain[0]), &p, &chain[..1]);
        }
        if let Some(c) = t.which_first.captures(q) {
            // Only the two named steps are needed; their step numbers order them.
            let product = resolve_product(sub, &c[1]).ok_or(not_in_context)?;
            let find = |name: &str| {
                sub.incoming(product, RelationLabel::BelongsToProduct)
                    .filter_map(|r| sub.entities.get(&r.src))
                    .filter(|e| e.kind == EntityKind::Process && e.name.eq_ignore_ascii_case(name.trim()))
                    .find_map(|e| Some((e.text_attr(attr::STEP)?.parse::<u32>().ok()?, e.id.clone())))
            };
            let (a, b) = (find(&c[2]).ok_or(not_in_context)?, find(&c[3]).ok_or(not_in_context)?);
            let first = if a.0 <= b.0 { &a.1 } else { &b.1 };
            return with(name_of(sub, first), product, &[a.1.clone(), b.1.clone()]);
        }
        if let Some(c) = t.next_after_first.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[1]).ok_or(not_in_context)?;
            return match chain.get(1) {
                Some(next) => with(name_of(sub, next), &p, &chain[..2]),
                None => with("No successor".into(), &p, &chain[..1]),
            };
        }
        if let Some(c) = t.next_after.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[2]).ok_or(not_in_context)?;
            let i = chain
                .iter()
                .position(|id| name_of(sub, id).eq_ignore_ascii_case(c[1].trim()))
                .ok_or(not_in_context)?;
            return match chain.get(i + 1) {
                Some(next) => with(name_of(sub, next), &p, &chain[i..i + 2]),
                None => with("No successor".into(), &p, &chain[i..i + 1]),
            };
        }
        if let Some(c) = t.requirement.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[2]).ok_or(not_in_context)?;
            let idx = match c.get(1) {
                Some(n) => n
                    .as_str()
                    .parse::<usize>()
                    .map_err(|_| not_in_context)?
                    .checked_sub(1)
                    .ok_or(not_in_context)?,
                None => 0,
            };
            let step = chain.get(idx).ok_or(not_in_context)?;
            let parts: Vec<String> = sub
                .outgoing(step, RelationLabel::RequiresPart)
                .map(|r| r.dst.clone())
                .collect();
            let tools: Vec<String> = sub
                .outgoing(step, RelationLabel::RequiresTool)
                .map(|r| r.dst.clone())
                .collect();
            let text = format!(
                "Parts: {}; Tools: {}",
                list_or_none(names(&parts)),
                list_or_none(names(&tools))
            );
            let mut ids = vec![step.clone()];
            ids.extend(parts);
            ids.extend(tools);
            return with(text, &p, &ids);
        }
        if let Some(c) = t.reference.captures(q) {
            let (p, chain) = Self::product_chain(sub, &c[2]).ok_or(not_in_context)?;
            let idx = c[1]
                .parse::<usize>()
                .map_err(|_| not_in_context)?
                .checked_sub(1)
                .ok_or(not_in_context)?;
            let step = chain.get(idx).ok_or(not_in_context)?;
            let reference: Vec<String> = sub
                .incoming(step, RelationLabel::ReferencePartOf)
                .map(|r| r.src.clone())
                .collect();
            return match reference.first() {
                Some(part) => with(name_of(sub, part), &p, &[step.clone(), part.clone()]),
                None => with("No reference part".into(), &p, std::slice::from_ref(step)),
            };
        }
        Err(AnswerStatus::Unsupported)
    }
}

impl Synthesizer for ScriptedSynthesizer {
    fn synthesize(&self, q: &Query, retrieval: &Retrieval) -> Result<Answer, RetrievalError> {
        let text = normalize_question(&q.text);
        let answer = self
            .answer_text(&text, &retrieval.subgraph)
            .unwrap_or_else(|status| Answer {
                text: match status {
                    AnswerStatus::Unsupported => "Unsupported question".into(),
                    _ => "Not found in the retrieved context".into(),
                },
                status,
                cited: Vec::new(),
            });
        debug_assert!({
            let prov = retrieval.context.provenance_ids();
            answer.cited.iter().all(|id| prov.contains(id.as_str()))
        });
        Ok(answer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linebalance::{evaluate, evaluate_feedback, BalanceTask};
    use crate::orchestrator::FactFlags;

    fn snap(flags: FactFlags) -> StateSnapshot {
        StateSnapshot {
            t: 1,
            instruction: "Assemble one valve".into(),
            product: None,
            flags,
            stations: 5,
            ct_limit: 250.0,
            last_observation: None,
            few_shot: Default::default(),
        }
    }

    #[test]
    fn decide_branch_order() {
        let mut f = FactFlags::default();
        let d = scripted_decide(&snap(f));
        assert!(matches!(
            d.action,
            AgentAction::KnowledgeAgent {
                need: KnowledgeNeed::Procedure,
                ..
            }
        ));
        assert!(
            matches!(&d.action, AgentAction::KnowledgeAgent { query, .. } if query.contains("Retrieve assembly procedure"))
        );
        f.process_known = true;
        f.times_known = true;
        assert!(matches!(
            scripted_decide(&snap(f)).action,
            AgentAction::LineBalanceAgent { stations: 5, .. }
        ));
        f.balance_solved = true;
        f.requirements_known = true;
        let d = scripted_decide(&snap(f));
        assert!(
            matches!(&d.action, AgentAction::SceneGraph { query } if query == "Retrieve location of tools and parts")
        );
        f.locations_known = true;
        assert_eq!(scripted_decide(&snap(f)).action, AgentAction::Final { subtasks: None });
    }

    fn short_for(inst: &BalanceInstance, a: Assignment) -> ShortMemory {
        let report = evaluate(inst, &a).unwrap();
        ShortMemory {
            round: 1,
            evaluation: evaluate_feedback(&report),
            assignment: a,
            report: Some(report),
        }
    }

    #[test]
    fn reflect_names_movable_task_and_least_loaded_station() {
        // Station 1 holds 30 + 10 + 23 = 63 against a 50 s limit: 13 s over.
        let tasks = vec![
            BalanceTask::new("a", 30.0, Vec::<String>::new()),
            BalanceTask::new("b", 10.0, Vec::<String>::new()),
            BalanceTask::new("c", 23.0, Vec::<String>::new()),
            BalanceTask::new("d", 40.0, Vec::<String>::new()),
            BalanceTask::new("e", 20.0, Vec::<String>::new()),
        ];
        let inst = BalanceInstance::new(tasks, 3, Some(50.0)).unwrap();
        let a = Assignment::from_ids(&[&["a", "b", "c"], &["d"], &["e"]]);
        let short = short_for(&inst, a);
        let r = scripted_reflect(&inst, &short, &Constraints::for_instance(&inst));
        assert_eq!(r.station, Some(1));
        assert_eq!(r.overload, Some(13.0));
        assert_eq!(r.movable, vec!["b".to_string()]);
        assert_eq!(
            r.suggested,
            Some(Edit::Move {
                task: "b".into(),
                from: 1,
                to: 3
            })
        );
        assert!(r.text.contains("13 s over"), "{}", r.text);
    }

    #[test]
    fn reflect_proposes_swap_when_nothing_fits() {
        // Crafted 4-task instance: station 1 = 30 + 25 = 55 > 50 by 5; both
        // tasks exceed 5 s and moving either alone overloads station 2.
        let tasks = vec![
            BalanceTask::new("a", 30.0, Vec::<String>::new()),
            BalanceTask::new("b", 25.0, Vec::<String>::new()),
            BalanceTask::new("c", 20.0, Vec::<String>::new()),
            BalanceTask::new("d", 20.0, Vec::<String>::new()),
        ];
        let inst = BalanceInstance::new(tasks, 2, Some(50.0)).unwrap();
        let short = short_for(&inst, Assignment::from_ids(&[&["a", "b"], &["c", "d"]]));
        let r = scripted_reflect(&inst, &short, &Constraints::for_instance(&inst));
        assert!(r.movable.is_empty());
        match r.suggested {
            Some(Edit::Swap {
                a,
                a_from: 1,
                b_from: 2,
                ..
            }) => assert!(a == "a" || a == "b"),
            other => panic!("expected a swap, got {other:?}"),
        }
    }

    #[test]
    fn reflect_is_empty_when_feasible() {
        let tasks = vec![BalanceTask::new("a", 1.0, Vec::<String>::new())];
        let inst = BalanceInstance::new(tasks, 1, Some(5.0)).unwrap();
        let short = short_for(&inst, Assignment::from_ids(&[&["a"]]));
        assert!(scripted_reflect(&inst, &short, &Constraints::for_instance(&inst)).is_empty());
    }

    #[test]
    fn question_normalization() {
        assert_eq!(
            normalize_question("  Which products require the “laser  marking” process?"),
            "Which products require the \"laser marking\" process?"
        );
    }
}
