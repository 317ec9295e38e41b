//! Scene graph of rooms, shelves, workstations and resource instances.
//!
//! `located_in` and `stored_on` edges point from the contained node to its
//! container and form a forest; `adjacent_to` is free-form. Part and tool
//! instances carry `attrs.catalog_ref`, the knowledge-graph id of what they are.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::{ContextBlock, FormattedContext};

pub const CATALOG_REF: &str = "catalog_ref";

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge ({src}, {label}, {dst}) references a missing node")]
    DanglingEdge {
        src: String,
        dst: String,
        label: SceneLabel,
    },
    #[error("duplicate edge ({src}, {label}, {dst})")]
    DuplicateEdge {
        src: String,
        dst: String,
        label: SceneLabel,
    },
    #[error("node `{0}` would have more than one container")]
    MultipleContainers(String),
    #[error("containment cycle through `{0}`")]
    ContainmentCycle(String),
    #[error("node `{0}` still has incident edges")]
    NodeInUse(String),
    #[error("edge ({src}, {label}, {dst}) does not exist")]
    MissingEdge {
        src: String,
        dst: String,
        label: SceneLabel,
    },
    #[error("update op {index} rejected: {source}")]
    Rejected {
        index: usize,
        #[source]
        source: Box<SceneError>,
    },
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Room,
    Shelf,
    Workstation,
    PartInstance,
    ToolInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    LocatedIn,
    StoredOn,
    AdjacentTo,
}

impl SceneLabel {
    pub fn is_containment(self) -> bool {
        matches!(self, SceneLabel::LocatedIn | SceneLabel::StoredOn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SceneLabel::LocatedIn => "located_in",
            SceneLabel::StoredOn => "stored_on",
            SceneLabel::AdjacentTo => "adjacent_to",
        }
    }
}

impl std::fmt::Display for SceneLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub id: String,
    pub kind: SceneKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

impl SceneNode {
    pub fn new(id: impl Into<String>, kind: SceneKind, name: impl Into<String>) -> Self {
        SceneNode {
            id: id.into(),
            kind,
            name: name.into(),
            coordinates: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn instance_of(mut self, catalog_ref: impl Into<String>) -> Self {
        self.attrs.insert(CATALOG_REF.to_string(), catalog_ref.into());
        self
    }

    pub fn catalog_ref(&self) -> Option<&str> {
        self.attrs.get(CATALOG_REF).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SceneEdge {
    pub src: String,
    pub dst: String,
    pub label: SceneLabel,
}

impl SceneEdge {
    pub fn new(src: impl Into<String>, label: SceneLabel, dst: impl Into<String>) -> Self {
        SceneEdge {
            src: src.into(),
            dst: dst.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SceneOp {
    AddNode(SceneNode),
    RemoveNode { id: String },
    AddEdge(SceneEdge),
    RemoveEdge(SceneEdge),
}

/// A located instance: its node id and containment chain, instance first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Located {
    pub node: String,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneGraph {
    nodes: BTreeMap<String, SceneNode>,
    edges: BTreeSet<SceneEdge>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    nodes: Vec<SceneNode>,
    edges: Vec<SceneEdge>,
}

impl SceneGraph {
    pub fn new(nodes: Vec<SceneNode>, edges: Vec<SceneEdge>) -> Result<Self, SceneError> {
        let mut sg = SceneGraph::default();
        for n in nodes {
            if sg.nodes.contains_key(&n.id) {
                return Err(SceneError::DuplicateNode(n.id));
            }
            sg.nodes.insert(n.id.clone(), n);
        }
        for e in edges {
            sg.insert_edge(e)?;
        }
        Ok(sg)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let err = |message: String| SceneError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            SceneError::Load { message, .. } => err(message),
            other => err(other.to_string()),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| SceneError::Load {
            path: "<json>".into(),
            message: format!("line {}, column {}: {e}", e.line(), e.column()),
        })?;
        Self::new(file.nodes, file.edges)
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile {
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.iter().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("scene serialization cannot fail")
    }

    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &SceneEdge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Workstation nodes ordered by id.
    pub fn workstations(&self) -> Vec<&SceneNode> {
        self.nodes
            .values()
            .filter(|n| n.kind == SceneKind::Workstation)
            .collect()
    }

    pub fn container_of(&self, id: &str) -> Option<&str> {
        self.edges
            .iter()
            .find(|e| e.src == id && e.label.is_containment())
            .map(|e| e.dst.as_str())
    }

    /// `id` followed by each enclosing container up to the root.
    pub fn containment_path(&self, id: &str) -> Vec<String> {
        let mut path = vec![id.to_string()];
        let mut cur = id;
        while let Some(next) = self.container_of(cur) {
            // Containment is acyclic, so this terminates.
            path.push(next.to_string());
            cur = next;
        }
        path
    }

    pub fn path_names(&self, path: &[String]) -> Vec<String> {
        path.iter()
            .map(|id| self.nodes.get(id).map_or_else(|| id.clone(), |n| n.name.clone()))
            .collect()
    }

    /// Every part or tool instance of `catalog_ref`, ordered by node id.
    pub fn locate(&self, catalog_ref: &str) -> Vec<Located> {
        self.nodes
            .values()
            .filter(|n| {
                matches!(n.kind, SceneKind::PartInstance | SceneKind::ToolInstance)
                    && n.catalog_ref() == Some(catalog_ref)
            })
            .map(|n| Located {
                node: n.id.clone(),
                path: self.containment_path(&n.id),
            })
            .collect()
    }

    /// One line per edge, ordered by (label, src id, dst id). With a focus,
    /// only edges inside the containment closure of the focus nodes are kept.
    pub fn serialize(&self, focus: Option<&[&str]>) -> Result<FormattedContext, SceneError> {
        let closure: Option<BTreeSet<String>> = match focus {
            None => None,
            Some(ids) => {
                let mut set = BTreeSet::new();
                for id in ids {
                    if !self.nodes.contains_key(*id) {
                        return Err(SceneError::UnknownNode(id.to_string()));
                    }
                    set.extend(self.containment_path(id));
                }
                Some(set)
            }
        };
        let mut edges: Vec<&SceneEdge> = self
            .edges
            .iter()
            .filter(|e| match &closure {
                None => true,
                Some(set) => set.contains(&e.src) && set.contains(&e.dst),
            })
            .collect();
        edges.sort_by(|a, b| (a.label, &a.src, &a.dst).cmp(&(b.label, &b.src, &b.dst)));
        let blocks = edges
            .into_iter()
            .map(|e| ContextBlock {
                text: format!("{} —{}→ {}", self.nodes[&e.src].name, e.label, self.nodes[&e.dst].name),
                provenance: vec![e.src.clone(), e.dst.clone()],
            })
            .collect();
        Ok(FormattedContext { blocks })
    }

    /// Applies `ops` atomically: either every op succeeds or the graph is
    /// returned unchanged together with the first violation.
    pub fn update(&self, ops: &[SceneOp]) -> Result<SceneGraph, SceneError> {
        let mut next = self.clone();
        for (index, op) in ops.iter().enumerate() {
            next.apply(op).map_err(|e| SceneError::Rejected {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(next)
    }

    fn apply(&mut self, op: &SceneOp) -> Result<(), SceneError> {
        match op {
            SceneOp::AddNode(n) => {
                if self.nodes.contains_key(&n.id) {
                    return Err(SceneError::DuplicateNode(n.id.clone()));
                }
                self.nodes.insert(n.id.clone(), n.clone());
            }
            SceneOp::RemoveNode { id } => {
                if !self.nodes.contains_key(id) {
                    return Err(SceneError::UnknownNode(id.clone()));
                }
                if self.edges.iter().any(|e| &e.src == id || &e.dst == id) {
                    return Err(SceneError::NodeInUse(id.clone()));
                }
                self.nodes.remove(id);
            }
            SceneOp::AddEdge(e) => self.insert_edge(e.clone())?,
            SceneOp::RemoveEdge(e) => {
                if !self.edges.remove(e) {
                    return Err(SceneError::MissingEdge {
                        src: e.src.clone(),
                        dst: e.dst.clone(),
                        label: e.label,
                    });
                }
            }
        }
        Ok(())
    }

    fn insert_edge(&mut self, e: SceneEdge) -> Result<(), SceneError> {
        if !self.nodes.contains_key(&e.src) || !self.nodes.contains_key(&e.dst) {
            return Err(SceneError::DanglingEdge {
                src: e.src,
                dst: e.dst,
                label: e.label,
            });
        }
        if self.edges.contains(&e) {
            return Err(SceneError::DuplicateEdge {
                src: e.src,
                dst: e.dst,
                label: e.label,
            });
        }
        if e.label.is_containment() {
            if self.container_of(&e.src).is_some() {
                return Err(SceneError::MultipleContainers(e.src));
            }
            if self.containment_path(&e.dst).contains(&e.src) {
                return Err(SceneError::ContainmentCycle(e.src));
            }
        }
        self.edges.insert(e);
        Ok(())
    }
}
