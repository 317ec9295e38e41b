//! Providers that delegate to a [`ChatClient`]. Replies are parsed as JSON and
//! checked before they reach the planner.

use serde::Deserialize;

use super::{ChatClient, CompletionRequest, Message};
use crate::linebalance::{ActorInput, Assignment, Proposer, ProposerError};
use crate::orchestrator::{Reasoner, ReasonerDecision, ReasonerError, StateSnapshot};
use crate::retrieval::{Answer, AnswerStatus, Query, Retrieval, RetrievalError, Synthesizer};

const REASONER_SYSTEM: &str = "You coordinate assembly task planning. At each step choose exactly one action \
given which facts are known. Reply with one JSON object and nothing else: \
{\"thought\": str, \"action\": A} where A is one of \
{\"target\": \"knowledge_agent\", \"query\": str, \"need\": \"procedure\"|\"times\"|\"requirements\"}, \
{\"target\": \"line_balance_agent\", \"stations\": int, \"ct_limit\": number}, \
{\"target\": \"scene_graph\", \"query\": str}, \
{\"target\": \"final\"}. \
Order: procedure, then processing times, then line balancing, then required parts and tools, \
then their locations, then final.";

const PROPOSER_SYSTEM: &str = "You balance an assembly line. Assign every task to exactly one station so that \
every predecessor sits on the same or an earlier station and every station load stays strictly below the \
cycle-time limit. Reply with one JSON object and nothing else: {\"stations\": [[task ids of station 1], ...]} \
listing each station's tasks in execution order.";

const SYNTH_SYSTEM: &str = "Answer the question about assembly processes using only the context lines. \
Give the bare answer without explanation. If the context lacks the answer, reply exactly: NOT IN CONTEXT";

/// First balanced `{...}` span in `text`, tolerating code fences and prose.
fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '{' if !in_str => depth += 1,
            '}' if !in_str => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

pub struct ChatReasoner<C> {
    client: C,
}

impl<C: ChatClient> ChatReasoner<C> {
    pub fn new(client: C) -> Self {
        ChatReasoner { client }
    }

    fn prompt(snap: &StateSnapshot) -> Vec<Message> {
        let mut messages = vec![Message::system(REASONER_SYSTEM)];
        for ex in snap.few_shot.exemplars() {
            messages.push(Message::user(format!("Example instruction: {}", ex.instruction)));
            messages.push(Message::assistant(format!("Example plan:\n{}", ex.plan)));
        }
        let state = serde_json::to_string_pretty(snap).expect("snapshot serializes");
        messages.push(Message::user(format!(
            "Current state:\n{state}\nChoose the next action."
        )));
        messages
    }

    fn parse(content: &str, snap: &StateSnapshot) -> Result<ReasonerDecision, String> {
        let raw = json_object(content).ok_or("no JSON object in reply")?;
        let decision: ReasonerDecision = serde_json::from_str(raw).map_err(|e| e.to_string())?;
        decision.action.check(snap)?;
        Ok(decision)
    }
}

impl<C: ChatClient> Reasoner for ChatReasoner<C> {
    /// Re-prompts once with the parse error before giving up.
    fn decide(&mut self, snap: &StateSnapshot) -> Result<ReasonerDecision, ReasonerError> {
        let mut messages = Self::prompt(snap);
        let first = self
            .client
            .complete(&CompletionRequest::new(self.client.model(), messages.clone()))?;
        let err = match Self::parse(&first.content, snap) {
            Ok(d) => return Ok(d),
            Err(e) => e,
        };
        tracing::warn!(error = %err, "reasoner reply rejected, re-prompting");
        messages.push(Message::assistant(first.content));
        messages.push(Message::user(format!(
            "That reply was rejected: {err}. Reply with a single valid JSON object."
        )));
        let second = self
            .client
            .complete(&CompletionRequest::new(self.client.model(), messages))?;
        Self::parse(&second.content, snap).map_err(ReasonerError::Malformed)
    }
}

pub struct ChatProposer<C> {
    client: C,
}

#[derive(Deserialize)]
struct StationsReply {
    stations: Vec<Vec<String>>,
}

impl<C: ChatClient> ChatProposer<C> {
    pub fn new(client: C) -> Self {
        ChatProposer { client }
    }

    fn prompt(input: &ActorInput<'_>) -> Vec<Message> {
        let inst = input.instance;
        let mut task_lines = String::new();
        for t in inst.tasks() {
            let preds: Vec<&str> = t.predecessors.iter().map(String::as_str).collect();
            task_lines.push_str(&format!(
                "- {}: {} s, predecessors [{}]\n",
                t.id,
                t.duration_s,
                preds.join(", ")
            ));
        }
        let c = input.constraints;
        let mut user = format!(
            "Tasks:\n{task_lines}Stations: {}\nCycle-time limit: {}\n",
            c.stations,
            c.ct_limit.map_or("none".to_string(), |l| format!("{l} s"))
        );
        for rule in &c.tool_rules {
            user.push_str(&format!("Rule: {rule}\n"));
        }
        for e in &c.evidence {
            user.push_str(&format!("Earlier failure: {e}\n"));
        }
        if let Some(short) = input.short {
            let stations = serde_json::to_string(&short.assignment.stations).expect("assignment serializes");
            user.push_str(&format!(
                "Previous proposal: {stations}\nEvaluation: {}\n",
                short.evaluation.summary()
            ));
        }
        for r in input.long {
            user.push_str(&format!("Reflection after round {}: {}\n", r.round, r.text));
        }
        user.push_str(&format!("Round {}. Propose an assignment.", input.round));
        vec![Message::system(PROPOSER_SYSTEM), Message::user(user)]
    }
}

impl<C: ChatClient> Proposer for ChatProposer<C> {
    fn propose(&mut self, input: &ActorInput<'_>) -> Result<Assignment, ProposerError> {
        let reply = self
            .client
            .complete(&CompletionRequest::new(self.client.model(), Self::prompt(input)))?;
        let raw =
            json_object(&reply.content).ok_or_else(|| ProposerError::Malformed("no JSON object in reply".into()))?;
        let parsed: StationsReply = serde_json::from_str(raw).map_err(|e| ProposerError::Malformed(e.to_string()))?;
        Ok(Assignment::new(parsed.stations))
    }
}

pub struct ChatSynthesizer<C> {
    client: C,
}

impl<C: ChatClient> ChatSynthesizer<C> {
    pub fn new(client: C) -> Self {
        ChatSynthesizer { client }
    }
}

impl<C: ChatClient> Synthesizer for ChatSynthesizer<C> {
    fn synthesize(&self, q: &Query, retrieval: &Retrieval) -> Result<Answer, RetrievalError> {
        let user = format!("Context:\n{}\nQuestion: {}", retrieval.context.render(), q.text);
        let req = CompletionRequest::new(
            self.client.model(),
            vec![Message::system(SYNTH_SYSTEM), Message::user(user)],
        );
        let text = self.client.complete(&req)?.content.trim().to_string();
        if text.eq_ignore_ascii_case("NOT IN CONTEXT") {
            return Ok(Answer {
                text,
                status: AnswerStatus::NotInContext,
                cited: Vec::new(),
            });
        }
        // Cite the context entities whose names the answer mentions.
        let lower = text.to_lowercase();
        let cited = retrieval
            .subgraph
            .entities
            .values()
            .filter(|e| retrieval.context.provenance_ids().contains(e.id.as_str()))
            .filter(|e| !e.name.is_empty() && lower.contains(&e.name.to_lowercase()))
            .map(|e| e.id.clone())
            .collect();
        Ok(Answer::answered(text, cited))
    }
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;

    use super::*;
    use crate::backend::{Completion, TransportError};
    use crate::orchestrator::{AgentAction, FactFlags, KnowledgeNeed};

    struct Canned(RefCell<Vec<String>>);

    impl ChatClient for Canned {
        fn model(&self) -> &str {
            "canned"
        }

        fn complete(&self, _: &CompletionRequest) -> Result<Completion, TransportError> {
            let content = self.0.borrow_mut().remove(0);
            Ok(Completion { content, retries: 0 })
        }
    }

    fn snap() -> StateSnapshot {
        StateSnapshot {
            t: 1,
            instruction: "Assemble one valve".into(),
            product: None,
            flags: FactFlags::default(),
            stations: 5,
            ct_limit: 250.0,
            last_observation: None,
            few_shot: Default::default(),
        }
    }

    #[test]
    fn extracts_json_from_fenced_reply() {
        let text = "Sure:\n```json\n{\"a\": \"}\", \"b\": {\"c\": 1}}\n```";
        assert_eq!(json_object(text), Some("{\"a\": \"}\", \"b\": {\"c\": 1}}"));
        assert_eq!(json_object("no braces"), None);
    }

    #[test]
    fn reasoner_reprompts_once() {
        let good = r#"{"thought": "t", "action": {"target": "knowledge_agent", "query": "q", "need": "procedure"}}"#;
        let client = Canned(RefCell::new(vec!["garbage".into(), good.into()]));
        let d = ChatReasoner::new(client).decide(&snap()).unwrap();
        assert!(matches!(
            d.action,
            AgentAction::KnowledgeAgent {
                need: KnowledgeNeed::Procedure,
                ..
            }
        ));
    }

    #[test]
    fn reasoner_rejects_out_of_order_action() {
        let early = r#"{"thought": "t", "action": {"target": "final"}}"#;
        let client = Canned(RefCell::new(vec![early.into(), early.into()]));
        assert!(matches!(
            ChatReasoner::new(client).decide(&snap()),
            Err(ReasonerError::Malformed(_))
        ));
    }
}
