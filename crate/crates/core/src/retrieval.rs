//! Two-layer retrieval over the knowledge graph.
//!
//! Layer one ranks entities by cosine similarity between the query embedding
//! and each entity's [`search_text`](crate::kgraph::Entity::search_text).
//! Layer two expands the top-k candidates by one hop and linearizes the
//! resulting subgraph into provenance-tagged text blocks that a synthesizer
//! turns into an answer.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::embed::{embed, EmbeddingVector};
use crate::backend::TransportError;
use crate::kgraph::{Entity, KgError, KnowledgeGraph, Relation, Subgraph};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("candidate count must be positive, got {0}")]
    InvalidK(usize),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error("synthesizer transport failed: {0}")]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub turn: usize,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Result<Self, RetrievalError> {
        Self::at_turn(text, 0)
    }

    pub fn at_turn(text: impl Into<String>, turn: usize) -> Result<Self, RetrievalError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        Ok(Query { text, turn })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
}

/// Ranked candidates: scores non-increasing, ties broken by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet(pub Vec<Candidate>);

impl CandidateSet {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|c| c.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.0.iter().position(|c| c.id == id)
    }
}

pub type ContextSubgraph = Subgraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub text: String,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FormattedContext {
    pub blocks: Vec<ContextBlock>,
}

impl FormattedContext {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn provenance_ids(&self) -> BTreeSet<&str> {
        self.blocks
            .iter()
            .flat_map(|b| b.provenance.iter().map(String::as_str))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&b.text);
            out.push('\n');
        }
        out
    }
}

/// Embeddings for every entity of one graph, sorted by entity id.
#[derive(Debug, Clone, Default)]
pub struct RetrievalIndex {
    entries: Vec<(String, EmbeddingVector)>,
}

impl RetrievalIndex {
    pub fn build(g: &KnowledgeGraph) -> Self {
        let entries = g.entities().map(|e| (e.id.clone(), embed(&e.search_text()))).collect();
        RetrievalIndex { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn retrieve(&self, q: &Query, k: usize) -> Result<CandidateSet, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK(k));
        }
        let qv = embed(&q.text);
        let mut scored: Vec<Candidate> = self
            .entries
            .iter()
            .map(|(id, v)| Candidate {
                id: id.clone(),
                score: qv.cosine(v),
            })
            .collect();
        // Entries are id-sorted and the sort is stable, so equal scores keep
        // ascending id order.
        scored.sort_by(|a, b| b.score.total_cmp(&a.score));
        scored.truncate(k);
        Ok(CandidateSet(scored))
    }
}

/// Output of both retrieval layers for one query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Retrieval {
    pub candidates: CandidateSet,
    pub subgraph: ContextSubgraph,
    pub context: FormattedContext,
}

pub fn retrieve(q: &Query, g: &KnowledgeGraph, k: usize) -> Result<CandidateSet, RetrievalError> {
    RetrievalIndex::build(g).retrieve(q, k)
}

pub fn two_layer_retrieve(
    q: &Query,
    g: &KnowledgeGraph,
    index: &RetrievalIndex,
    k: usize,
) -> Result<Retrieval, RetrievalError> {
    let candidates = index.retrieve(q, k)?;
    let subgraph = g.neighbors(candidates.ids())?;
    let context = format_context(&candidates, &subgraph);
    Ok(Retrieval {
        candidates,
        subgraph,
        context,
    })
}

pub fn relation_line(sub: &Subgraph, r: &Relation) -> String {
    format!(
        "{} —{}→ {}",
        sub.entities[&r.src].name, r.label, sub.entities[&r.dst].name
    )
}

fn attribute_line(e: &Entity) -> String {
    let mut line = format!("{} [{} {}]", e.name, e.kind, e.id);
    if !e.attrs.is_empty() {
        let attrs: Vec<String> = e.attrs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        line.push_str(": ");
        line.push_str(&attrs.join("; "));
    }
    line
}

/// Linearizes candidates and their expansion: each candidate in rank order
/// contributes its attribute line and then its not-yet-emitted relations
/// sorted by (label, dst id); the remaining expansion entities and relations
/// follow in the same key order.
pub fn format_context(candidates: &CandidateSet, sub: &Subgraph) -> FormattedContext {
    let rel_key = |r: &&Relation| (r.label, r.dst.clone(), r.src.clone());
    let mut blocks = Vec::new();
    let mut emitted_entities: BTreeSet<&str> = BTreeSet::new();
    let mut emitted_relations: BTreeSet<&Relation> = BTreeSet::new();

    for id in candidates.ids() {
        let Some(e) = sub.entities.get(id) else {
            continue;
        };
        blocks.push(ContextBlock {
            text: attribute_line(e),
            provenance: vec![e.id.clone()],
        });
        emitted_entities.insert(&e.id);
        let mut rels: Vec<&Relation> = sub
            .relations
            .iter()
            .filter(|r| (r.src == id || r.dst == id) && !emitted_relations.contains(r))
            .collect();
        rels.sort_by_key(rel_key);
        for r in rels {
            blocks.push(ContextBlock {
                text: relation_line(sub, r),
                provenance: vec![r.src.clone(), r.dst.clone()],
            });
            emitted_relations.insert(r);
        }
    }
    for (id, e) in &sub.entities {
        if !emitted_entities.contains(id.as_str()) {
            blocks.push(ContextBlock {
                text: attribute_line(e),
                provenance: vec![id.clone()],
            });
        }
    }
    let mut rest: Vec<&Relation> = sub
        .relations
        .iter()
        .filter(|r| !emitted_relations.contains(r))
        .collect();
    rest.sort_by_key(rel_key);
    for r in rest {
        blocks.push(ContextBlock {
            text: relation_line(sub, r),
            provenance: vec![r.src.clone(), r.dst.clone()],
        });
    }
    FormattedContext { blocks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    Answered,
    /// The question matched no supported template.
    Unsupported,
    /// A template matched but the retrieved context lacked the needed facts.
    NotInContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub status: AnswerStatus,
    /// Entities the answer relies on; always a subset of the context provenance.
    pub cited: Vec<String>,
}

impl Answer {
    pub fn answered(text: impl Into<String>, cited: Vec<String>) -> Self {
        Answer {
            text: text.into(),
            status: AnswerStatus::Answered,
            cited,
        }
    }
}

pub trait Synthesizer {
    fn synthesize(&self, q: &Query, retrieval: &Retrieval) -> Result<Answer, RetrievalError>;
}

/// The knowledge agent: retrieval index plus answer synthesis over one graph.
pub struct KnowledgeAgent<'g> {
    graph: &'g KnowledgeGraph,
    index: RetrievalIndex,
    k: usize,
}

impl<'g> KnowledgeAgent<'g> {
    pub fn new(graph: &'g KnowledgeGraph) -> Self {
        Self::with_k(graph, DEFAULT_K)
    }

    pub fn with_k(graph: &'g KnowledgeGraph, k: usize) -> Self {
        KnowledgeAgent {
            graph,
            index: RetrievalIndex::build(graph),
            k,
        }
    }

    pub fn graph(&self) -> &'g KnowledgeGraph {
        self.graph
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn retrieve(&self, q: &Query) -> Result<CandidateSet, RetrievalError> {
        self.index.retrieve(q, self.k)
    }

    pub fn two_layer(&self, q: &Query) -> Result<Retrieval, RetrievalError> {
        two_layer_retrieve(q, self.graph, &self.index, self.k)
    }

    pub fn answer(&self, q: &Query, synth: &dyn Synthesizer) -> Result<(Answer, Retrieval), RetrievalError> {
        let retrieval = self.two_layer(q)?;
        let answer = synth.synthesize(q, &retrieval)?;
        Ok((answer, retrieval))
    }
}
