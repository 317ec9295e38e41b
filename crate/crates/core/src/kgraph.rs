//! In-memory industrial knowledge graph.
//!
//! Entities (products, processes, parts, tools) and labelled relations are kept
//! with set semantics: ids are unique, `(src, label, dst)` triples never repeat.
//! Growth happens through [`KnowledgeGraph::merge`], which is the only mutation
//! path, so referential integrity and per-product step chains are checked in one
//! place. Structured [`ProcessDocument`]s are turned into subgraphs by
//! [`ProcessDocument::extract`] and merged with [`KnowledgeGraph::ingest`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("process document for `{0}` has no steps")]
    EmptyDocument(String),
    #[error("step order must be strictly increasing in `{product}`: {prev} followed by {next}")]
    NonIncreasingOrder { product: String, prev: i64, next: i64 },
    #[error("step {order} of `{product}` has non-positive duration {duration}")]
    NonPositiveDuration { product: String, order: i64, duration: f64 },
    #[error("step {order} of `{product}` names reference part `{part}` which no step of the document uses")]
    UnknownReferencePart { product: String, order: i64, part: String },
    #[error("step {order} of `{product}` lists predecessor {pred} which is not an earlier step")]
    UnknownPredecessor { product: String, order: i64, pred: i64 },
    #[error("step {order} of `{product}` has unsupported verb `{verb}`")]
    UnknownVerb { product: String, order: i64, verb: String },
    #[error("relation {0} has an endpoint that does not resolve")]
    DanglingRelation(Relation),
    #[error("attribute `{key}` of `{entity}` changes type between number and text")]
    AttributeTypeClash { entity: String, key: String },
    #[error("entity `{id}` is a {existing} and cannot be merged as a {new}")]
    KindClash {
        id: String,
        existing: EntityKind,
        new: EntityKind,
    },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("step chain of product `{product}` is broken: {detail}")]
    BrokenChain { product: String, detail: String },
    #[error("process `{0}` has no valid time_seconds attribute")]
    MissingProcessTime(String),
    #[error("duplicate entity id `{0}` in graph file")]
    DuplicateEntity(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T, E = KgError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Product,
    Process,
    Part,
    Tool,
    Attribute,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Product => "product",
            EntityKind::Process => "process",
            EntityKind::Part => "part",
            EntityKind::Tool => "tool",
            EntityKind::Attribute => "attribute",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Number(f64),
    Text(String),
}

impl AttrValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Number(n) => Some(*n),
            AttrValue::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            AttrValue::Number(_) => None,
        }
    }

    fn same_type(&self, other: &AttrValue) -> bool {
        matches!(
            (self, other),
            (AttrValue::Number(_), AttrValue::Number(_)) | (AttrValue::Text(_), AttrValue::Text(_))
        )
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

/// Attribute keys written by document ingestion.
pub mod attr {
    pub const TIME_SECONDS: &str = "time_seconds";
    pub const STEP: &str = "step";
    pub const VERB: &str = "verb";
    pub const PREDECESSORS: &str = "predecessors";
    pub const PRODUCT: &str = "product";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, AttrValue>,
}

impl Entity {
    pub fn new(id: impl Into<String>, kind: EntityKind, name: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            kind,
            name: name.into(),
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: AttrValue) -> Self {
        self.attrs.insert(key.to_string(), value);
        self
    }

    pub fn time_seconds(&self) -> Option<f64> {
        self.attrs.get(attr::TIME_SECONDS).and_then(AttrValue::as_f64)
    }

    pub fn text_attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).and_then(AttrValue::as_str)
    }

    /// Text indexed for similarity search: the name followed by every
    /// descriptive text attribute. Id lists such as `predecessors` are left out.
    pub fn search_text(&self) -> String {
        let mut out = self.name.clone();
        for (key, value) in &self.attrs {
            if key == attr::PREDECESSORS {
                continue;
            }
            if let AttrValue::Text(s) = value {
                out.push(' ');
                out.push_str(s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationLabel {
    FirstStepOf,
    NextStep,
    RequiresPart,
    RequiresTool,
    ReferencePartOf,
    BelongsToProduct,
    HasAttribute,
}

impl RelationLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationLabel::FirstStepOf => "first_step_of",
            RelationLabel::NextStep => "next_step",
            RelationLabel::RequiresPart => "requires_part",
            RelationLabel::RequiresTool => "requires_tool",
            RelationLabel::ReferencePartOf => "reference_part_of",
            RelationLabel::BelongsToProduct => "belongs_to_product",
            RelationLabel::HasAttribute => "has_attribute",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub src: String,
    pub dst: String,
    pub label: RelationLabel,
}

impl Relation {
    pub fn new(src: impl Into<String>, label: RelationLabel, dst: impl Into<String>) -> Self {
        Relation {
            src: src.into(),
            dst: dst.into(),
            label,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.src, self.label, self.dst)
    }
}

/// An attribute overwritten during a merge.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrConflict {
    pub entity: String,
    pub key: String,
    pub old: AttrValue,
    pub new: AttrValue,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeStats {
    pub entities_added: usize,
    pub relations_added: usize,
    pub conflicts: Vec<AttrConflict>,
}

/// A set of entities plus the relations among them, all drawn from one graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Subgraph {
    pub entities: BTreeMap<String, Entity>,
    pub relations: BTreeSet<Relation>,
}

impl Subgraph {
    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a Relation> + 'a {
        self.relations.iter().filter(move |r| r.src == id && r.label == label)
    }

    pub fn incoming<'a>(&'a self, id: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a Relation> + 'a {
        self.relations.iter().filter(move |r| r.dst == id && r.label == label)
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<String, Entity>,
    relations: BTreeSet<Relation>,
    by_label: BTreeMap<RelationLabel, BTreeSet<Relation>>,
    adjacency: BTreeMap<String, BTreeSet<Relation>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities && self.relations == other.relations
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn contains_relation(&self, rel: &Relation) -> bool {
        self.relations.contains(rel)
    }

    pub fn relations_with_label(&self, label: RelationLabel) -> impl Iterator<Item = &Relation> {
        self.by_label.get(&label).into_iter().flatten()
    }

    /// Relations touching `id` in either direction.
    pub fn incident(&self, id: &str) -> impl Iterator<Item = &Relation> {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn outgoing<'a>(&'a self, id: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a Relation> + 'a {
        self.incident(id).filter(move |r| r.src == id && r.label == label)
    }

    pub fn incoming<'a>(&'a self, id: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a Relation> + 'a {
        self.incident(id).filter(move |r| r.dst == id && r.label == label)
    }

    pub fn products(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(|e| e.kind == EntityKind::Product)
    }

    /// Set-union merge of new entities and relations.
    ///
    /// Entities whose id already exists have their attribute maps merged, with
    /// the incoming value winning on a key conflict. The merge is all or
    /// nothing: on error the graph is left untouched.
    pub fn merge(&mut self, new_entities: Vec<Entity>, new_relations: Vec<Relation>) -> Result<MergeStats> {
        // Validate everything up front so that a failure leaves `self` intact.
        let mut incoming: BTreeMap<String, Entity> = BTreeMap::new();
        for e in new_entities {
            let base = match incoming.remove(&e.id) {
                Some(prev) => Some(prev),
                None => self.entities.get(&e.id).cloned(),
            };
            let merged = match base {
                Some(existing) => merge_entity(existing, e)?.0,
                None => e,
            };
            incoming.insert(merged.id.clone(), merged);
        }
        for r in &new_relations {
            let resolves = |id: &str| self.entities.contains_key(id) || incoming.contains_key(id);
            if !resolves(&r.src) || !resolves(&r.dst) {
                return Err(KgError::DanglingRelation(r.clone()));
            }
        }

        let mut stats = MergeStats::default();
        for (id, e) in incoming {
            match self.entities.remove(&id) {
                Some(existing) => {
                    let (merged, conflicts) = merge_entity(existing, e)?;
                    for c in &conflicts {
                        tracing::warn!(entity = %c.entity, key = %c.key, old = %c.old, new = %c.new, "attribute overwritten on merge");
                    }
                    stats.conflicts.extend(conflicts);
                    self.entities.insert(id, merged);
                }
                None => {
                    stats.entities_added += 1;
                    self.entities.insert(id, e);
                }
            }
        }
        for r in new_relations {
            if self.insert_relation(r) {
                stats.relations_added += 1;
            }
        }
        Ok(stats)
    }

    /// Functional form of [`merge`](Self::merge).
    pub fn merged(&self, new_entities: Vec<Entity>, new_relations: Vec<Relation>) -> Result<KnowledgeGraph> {
        let mut g = self.clone();
        g.merge(new_entities, new_relations)?;
        Ok(g)
    }

    fn insert_relation(&mut self, r: Relation) -> bool {
        if !self.relations.insert(r.clone()) {
            return false;
        }
        self.by_label.entry(r.label).or_default().insert(r.clone());
        self.adjacency.entry(r.src.clone()).or_default().insert(r.clone());
        self.adjacency.entry(r.dst.clone()).or_default().insert(r);
        true
    }

    /// Parses `doc`, merges its subgraph, and checks the product's step chain.
    pub fn ingest(&mut self, doc: &ProcessDocument) -> Result<MergeStats> {
        let (entities, relations) = doc.extract()?;
        let mut next = self.clone();
        let stats = next.merge(entities, relations)?;
        next.product_chain(&doc.product_id)?;
        *self = next;
        Ok(stats)
    }

    /// The seed entities, every entity one relation away in either direction,
    /// and all relations among that set.
    pub fn neighbors<'a, I>(&self, ids: I) -> Result<Subgraph>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut keep: BTreeSet<&str> = BTreeSet::new();
        for id in ids {
            let (id, _) = self
                .entities
                .get_key_value(id)
                .ok_or_else(|| KgError::UnknownEntity(id.to_string()))?;
            keep.insert(id);
            for r in self.incident(id) {
                keep.insert(&r.src);
                keep.insert(&r.dst);
            }
        }
        let mut sub = Subgraph::default();
        for id in &keep {
            sub.entities.insert(id.to_string(), self.entities[*id].clone());
            for r in self.incident(id) {
                if keep.contains(r.src.as_str()) && keep.contains(r.dst.as_str()) {
                    sub.relations.insert(r.clone());
                }
            }
        }
        Ok(sub)
    }

    /// Processes of `product_id` in execution order, found by walking
    /// `next_step` from the `first_step_of` target.
    pub fn product_chain(&self, product_id: &str) -> Result<Vec<&Entity>> {
        let broken = |detail: String| KgError::BrokenChain {
            product: product_id.to_string(),
            detail,
        };
        match self.entities.get(product_id) {
            Some(e) if e.kind == EntityKind::Product => {}
            _ => return Err(KgError::UnknownEntity(product_id.to_string())),
        }
        let members: BTreeSet<&str> = self
            .incoming(product_id, RelationLabel::BelongsToProduct)
            .map(|r| r.src.as_str())
            .filter(|id| self.entities[*id].kind == EntityKind::Process)
            .collect();
        let firsts: Vec<&str> = self
            .incoming(product_id, RelationLabel::FirstStepOf)
            .map(|r| r.src.as_str())
            .collect();
        let first = match firsts.as_slice() {
            [only] => *only,
            [] => return Err(broken("no first_step_of relation".into())),
            _ => return Err(broken(format!("{} first steps", firsts.len()))),
        };
        let mut chain = Vec::with_capacity(members.len());
        let mut seen = BTreeSet::new();
        let mut cur = first;
        loop {
            if !members.contains(cur) {
                return Err(broken(format!("`{cur}` does not belong to the product")));
            }
            if !seen.insert(cur) {
                return Err(broken(format!("cycle through `{cur}`")));
            }
            chain.push(&self.entities[cur]);
            let next: Vec<&str> = self
                .outgoing(cur, RelationLabel::NextStep)
                .map(|r| r.dst.as_str())
                .collect();
            match next.as_slice() {
                [] => break,
                [n] => cur = n,
                _ => return Err(broken(format!("`{cur}` has {} successors", next.len()))),
            }
        }
        if seen.len() != members.len() {
            return Err(broken(format!(
                "walk visits {} of {} processes",
                seen.len(),
                members.len()
            )));
        }
        Ok(chain)
    }

    /// Full scan of every graph invariant.
    pub fn validate(&self) -> Result<()> {
        for r in &self.relations {
            if !self.entities.contains_key(&r.src) || !self.entities.contains_key(&r.dst) {
                return Err(KgError::DanglingRelation(r.clone()));
            }
        }
        for e in self.entities.values() {
            if e.kind == EntityKind::Process && !e.time_seconds().is_some_and(|t| t >= 0.0) {
                return Err(KgError::MissingProcessTime(e.id.clone()));
            }
        }
        for p in self.products() {
            self.product_chain(&p.id)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            entities: self.entities.values().cloned().collect(),
            relations: self.relations.iter().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut g = KnowledgeGraph::new();
        for e in file.entities {
            if g.entities.contains_key(&e.id) {
                return Err(serde::de::Error::custom(KgError::DuplicateEntity(e.id)));
            }
            g.entities.insert(e.id.clone(), e);
        }
        for r in file.relations {
            if !g.entities.contains_key(&r.src) || !g.entities.contains_key(&r.dst) {
                return Err(serde::de::Error::custom(KgError::DanglingRelation(r)));
            }
            g.insert_relation(r);
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        Self::from_json(&text).map_err(|e| parse_error(path, &e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| KgError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(path: &Path, e: &serde_json::Error) -> KgError {
    KgError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn merge_entity(mut existing: Entity, new: Entity) -> Result<(Entity, Vec<AttrConflict>)> {
    if existing.kind != new.kind {
        return Err(KgError::KindClash {
            id: existing.id,
            existing: existing.kind,
            new: new.kind,
        });
    }
    let mut conflicts = Vec::new();
    for (key, value) in new.attrs {
        match existing.attrs.get(&key) {
            Some(old) if !old.same_type(&value) => {
                return Err(KgError::AttributeTypeClash {
                    entity: existing.id,
                    key,
                });
            }
            Some(old) if *old != value => {
                conflicts.push(AttrConflict {
                    entity: existing.id.clone(),
                    key: key.clone(),
                    old: old.clone(),
                    new: value.clone(),
                });
                existing.attrs.insert(key, value);
            }
            Some(_) => {}
            None => {
                existing.attrs.insert(key, value);
            }
        }
    }
    existing.name = new.name;
    Ok((existing, conflicts))
}

/// Operation verbs a process step may declare.
pub const PROCESS_VERBS: [&str; 5] = ["place", "install", "press_fit", "tighten", "inspect"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessStep {
    pub order: i64,
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub parts: Vec<String>,
    #[serde(default)]
    pub tools: Vec<String>,
    #[serde(default)]
    pub reference_part: Option<String>,
    /// Orders of steps that must finish first. Absent means "the previous step".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predecessors: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDocument {
    pub product_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_name: Option<String>,
    pub steps: Vec<ProcessStep>,
}

impl ProcessDocument {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        serde_json::from_str(&text).map_err(|e| parse_error(path, &e))
    }

    pub fn process_id(&self, order: i64) -> String {
        format!("{}/step_{:02}", self.product_id, order)
    }

    pub fn validate(&self) -> Result<()> {
        let product = || self.product_id.clone();
        if self.steps.is_empty() {
            return Err(KgError::EmptyDocument(product()));
        }
        let used_parts: BTreeSet<&str> = self
            .steps
            .iter()
            .flat_map(|s| s.parts.iter().map(String::as_str))
            .collect();
        let mut seen_orders = BTreeSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 && step.order <= self.steps[i - 1].order {
                return Err(KgError::NonIncreasingOrder {
                    product: product(),
                    prev: self.steps[i - 1].order,
                    next: step.order,
                });
            }
            if !step.duration_s.is_finite() || step.duration_s <= 0.0 {
                return Err(KgError::NonPositiveDuration {
                    product: product(),
                    order: step.order,
                    duration: step.duration_s,
                });
            }
            if let Some(part) = &step.reference_part {
                if !used_parts.contains(part.as_str()) {
                    return Err(KgError::UnknownReferencePart {
                        product: product(),
                        order: step.order,
                        part: part.clone(),
                    });
                }
            }
            for pred in step.predecessors.iter().flatten() {
                if !seen_orders.contains(pred) {
                    return Err(KgError::UnknownPredecessor {
                        product: product(),
                        order: step.order,
                        pred: *pred,
                    });
                }
            }
            if let Some(verb) = &step.verb {
                if !PROCESS_VERBS.contains(&verb.as_str()) {
                    return Err(KgError::UnknownVerb {
                        product: product(),
                        order: step.order,
                        verb: verb.clone(),
                    });
                }
            }
            seen_orders.insert(step.order);
        }
        Ok(())
    }

    /// Entity and relation extraction for one structured document.
    pub fn extract(&self) -> Result<(Vec<Entity>, Vec<Relation>)> {
        use RelationLabel::*;
        self.validate()?;
        let pid = &self.product_id;
        let mut entities = vec![Entity::new(
            pid.clone(),
            EntityKind::Product,
            self.product_name.clone().unwrap_or_else(|| pid.clone()),
        )];
        let mut relations = Vec::new();
        let mut resources: BTreeMap<&str, EntityKind> = BTreeMap::new();

        for (i, step) in self.steps.iter().enumerate() {
            let id = self.process_id(step.order);
            let preds: Vec<String> = match &step.predecessors {
                Some(list) => list.iter().map(|o| self.process_id(*o)).collect(),
                None if i > 0 => vec![self.process_id(self.steps[i - 1].order)],
                None => Vec::new(),
            };
            entities.push(
                Entity::new(id.clone(), EntityKind::Process, step.name.clone())
                    .with_attr(attr::TIME_SECONDS, AttrValue::Number(step.duration_s))
                    .with_attr(attr::STEP, AttrValue::Text(format!("{:02}", step.order)))
                    .with_attr(attr::PRODUCT, AttrValue::Text(pid.clone()))
                    .with_attr(
                        attr::VERB,
                        AttrValue::Text(step.verb.clone().unwrap_or_else(|| "install".into())),
                    )
                    .with_attr(attr::PREDECESSORS, AttrValue::Text(preds.join(";"))),
            );
            relations.push(Relation::new(id.clone(), BelongsToProduct, pid.clone()));
            if i == 0 {
                relations.push(Relation::new(id.clone(), FirstStepOf, pid.clone()));
            } else {
                relations.push(Relation::new(
                    self.process_id(self.steps[i - 1].order),
                    NextStep,
                    id.clone(),
                ));
            }
            for part in &step.parts {
                resources.insert(part, EntityKind::Part);
                relations.push(Relation::new(id.clone(), RequiresPart, part.clone()));
            }
            for tool in &step.tools {
                if resources.get(tool.as_str()) == Some(&EntityKind::Part) {
                    return Err(KgError::KindClash {
                        id: tool.clone(),
                        existing: EntityKind::Part,
                        new: EntityKind::Tool,
                    });
                }
                resources.insert(tool, EntityKind::Tool);
                relations.push(Relation::new(id.clone(), RequiresTool, tool.clone()));
            }
            if let Some(part) = &step.reference_part {
                relations.push(Relation::new(part.clone(), ReferencePartOf, id.clone()));
            }
        }
        for (rid, kind) in resources {
            entities.push(Entity::new(rid, kind, rid));
            relations.push(Relation::new(rid, BelongsToProduct, pid.clone()));
        }
        Ok((entities, relations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(order: i64, name: &str, parts: &[&str], tools: &[&str], reference: Option<&str>) -> ProcessStep {
        ProcessStep {
            order,
            name: name.to_string(),
            duration_s: 10.0 * order as f64,
            parts: parts.iter().map(|s| s.to_string()).collect(),
            tools: tools.iter().map(|s| s.to_string()).collect(),
            reference_part: reference.map(str::to_string),
            predecessors: None,
            verb: None,
        }
    }

    fn fixture() -> KnowledgeGraph {
        let doc = ProcessDocument {
            product_id: "P1".into(),
            product_name: Some("Widget P1".into()),
            steps: vec![
                step(4, "Seat body", &["body"], &[], None),
                step(5, "Insert pin", &["pin"], &["T2"], Some("body")),
                step(6, "Check", &[], &[], None),
            ],
        };
        let mut g = KnowledgeGraph::new();
        g.ingest(&doc).unwrap();
        g
    }

    #[test]
    fn ingest_builds_chain_and_requirements() {
        let g = fixture();
        let chain: Vec<_> = g.product_chain("P1").unwrap().iter().map(|e| e.name.clone()).collect();
        assert_eq!(chain, ["Seat body", "Insert pin", "Check"]);
        assert!(g.contains_relation(&Relation::new("P1/step_05", RelationLabel::RequiresTool, "T2")));
        assert!(g.contains_relation(&Relation::new("body", RelationLabel::ReferencePartOf, "P1/step_05")));
        assert_eq!(
            g.entity("P1/step_05").unwrap().text_attr(attr::PREDECESSORS),
            Some("P1/step_04")
        );
        g.validate().unwrap();
    }

    #[test]
    fn neighbors_of_middle_step() {
        let g = fixture();
        let sub = g.neighbors(["P1/step_05"]).unwrap();
        let ids: Vec<_> = sub.entities.keys().cloned().collect();
        assert_eq!(
            ids,
            ["P1", "P1/step_04", "P1/step_05", "P1/step_06", "T2", "body", "pin"]
        );
        // body -> P1 and pin -> P1 are among the returned entities too.
        assert!(sub
            .relations
            .contains(&Relation::new("body", RelationLabel::BelongsToProduct, "P1")));
        assert!(sub
            .relations
            .iter()
            .all(|r| sub.contains(&r.src) && sub.contains(&r.dst)));
    }

    #[test]
    fn neighbors_rejects_unknown_id() {
        let g = fixture();
        match g.neighbors(["nope"]) {
            Err(KgError::UnknownEntity(id)) => assert_eq!(id, "nope"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn isolated_seed_is_returned_alone() {
        let mut g = KnowledgeGraph::new();
        g.merge(vec![Entity::new("lonely", EntityKind::Tool, "lonely")], vec![])
            .unwrap();
        let sub = g.neighbors(["lonely"]).unwrap();
        assert_eq!(sub.entities.len(), 1);
        assert!(sub.relations.is_empty());
    }

    #[test]
    fn seeding_everything_returns_the_graph() {
        let g = fixture();
        let ids: Vec<String> = g.entities().map(|e| e.id.clone()).collect();
        let sub = g.neighbors(ids.iter().map(String::as_str)).unwrap();
        assert_eq!(sub.entities.len(), g.entity_count());
        assert_eq!(sub.relations.len(), g.relation_count());
    }

    #[test]
    fn empty_document_is_rejected() {
        let doc = ProcessDocument {
            product_id: "X".into(),
            product_name: None,
            steps: vec![],
        };
        assert!(matches!(
            KnowledgeGraph::new().ingest(&doc),
            Err(KgError::EmptyDocument(_))
        ));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let mut doc = ProcessDocument {
            product_id: "X".into(),
            product_name: None,
            steps: vec![step(2, "a", &["p"], &[], None), step(2, "b", &[], &[], None)],
        };
        assert!(matches!(doc.validate(), Err(KgError::NonIncreasingOrder { .. })));
        doc.steps[1].order = 3;
        doc.steps[1].reference_part = Some("ghost".into());
        assert!(matches!(doc.validate(), Err(KgError::UnknownReferencePart { .. })));
        doc.steps[1].reference_part = None;
        doc.steps[1].predecessors = Some(vec![7]);
        assert!(matches!(doc.validate(), Err(KgError::UnknownPredecessor { .. })));
        doc.steps[1].predecessors = None;
        doc.steps[1].duration_s = 0.0;
        assert!(matches!(doc.validate(), Err(KgError::NonPositiveDuration { .. })));
    }

    #[test]
    fn merge_counts_follow_set_union() {
        let mut g = KnowledgeGraph::new();
        let base: Vec<Entity> = (0..10)
            .map(|i| Entity::new(format!("e{i}"), EntityKind::Part, "p"))
            .collect();
        g.merge(base, vec![]).unwrap();
        let mut new: Vec<Entity> = (10..13)
            .map(|i| Entity::new(format!("e{i}"), EntityKind::Part, "p"))
            .collect();
        new.push(Entity::new("e0", EntityKind::Part, "p"));
        new.push(Entity::new("e1", EntityKind::Part, "p"));
        g.merge(new, vec![]).unwrap();
        assert_eq!(g.entity_count(), 13);

        let before = g.clone();
        g.merge(vec![], vec![]).unwrap();
        assert_eq!(g, before);

        let r = Relation::new("e0", RelationLabel::NextStep, "e1");
        let stats = g.merge(vec![], vec![r.clone(), r.clone()]).unwrap();
        assert_eq!(stats.relations_added, 1);
        assert_eq!(g.relation_count(), before.relation_count() + 1);
    }

    #[test]
    fn merge_new_attribute_wins_and_is_reported() {
        let mut g = KnowledgeGraph::new();
        g.merge(
            vec![Entity::new("a", EntityKind::Tool, "a").with_attr("model", AttrValue::Text("v1".into()))],
            vec![],
        )
        .unwrap();
        let stats = g
            .merge(
                vec![Entity::new("a", EntityKind::Tool, "a").with_attr("model", AttrValue::Text("v2".into()))],
                vec![],
            )
            .unwrap();
        assert_eq!(stats.conflicts.len(), 1);
        assert_eq!(g.entity("a").unwrap().text_attr("model"), Some("v2"));
    }

    #[test]
    fn merge_rejects_type_clash_and_dangling() {
        let mut g = KnowledgeGraph::new();
        g.merge(
            vec![Entity::new("a", EntityKind::Tool, "a").with_attr("size", AttrValue::Number(3.0))],
            vec![],
        )
        .unwrap();
        let before = g.clone();
        let err = g
            .merge(
                vec![Entity::new("a", EntityKind::Tool, "a").with_attr("size", AttrValue::Text("M3".into()))],
                vec![],
            )
            .unwrap_err();
        assert!(matches!(err, KgError::AttributeTypeClash { ref key, .. } if key == "size"));
        let err = g
            .merge(vec![], vec![Relation::new("a", RelationLabel::NextStep, "zz")])
            .unwrap_err();
        assert!(matches!(err, KgError::DanglingRelation(_)));
        assert_eq!(g, before);
    }

    #[test]
    fn conflicting_reingest_keeps_graph() {
        let mut g = fixture();
        let before = g.clone();
        let doc = ProcessDocument {
            product_id: "P1".into(),
            product_name: Some("Widget P1".into()),
            steps: vec![step(1, "Other start", &[], &[], None)],
        };
        assert!(matches!(g.ingest(&doc), Err(KgError::BrokenChain { .. })));
        assert_eq!(g, before);
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let g = fixture();
        let back = KnowledgeGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.relations_with_label(RelationLabel::NextStep).count(), 2);
    }
}
