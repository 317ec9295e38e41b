use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Artifacts, PlanError};
use crate::kgraph::KnowledgeGraph;
use crate::linebalance::Assignment;
use crate::scenegraph::{Coordinates, Located, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskVerb {
    Pick,
    Place,
    Install,
    PressFit,
    Tighten,
    SwitchTool,
    Inspect,
}

impl SubtaskVerb {
    pub fn as_str(self) -> &'static str {
        match self {
            SubtaskVerb::Pick => "pick",
            SubtaskVerb::Place => "place",
            SubtaskVerb::Install => "install",
            SubtaskVerb::PressFit => "press_fit",
            SubtaskVerb::Tighten => "tighten",
            SubtaskVerb::SwitchTool => "switch_tool",
            SubtaskVerb::Inspect => "inspect",
        }
    }

    /// Maps a process verb from the knowledge graph.
    pub fn from_process_verb(verb: &str) -> Option<Self> {
        match verb {
            "place" => Some(SubtaskVerb::Place),
            "install" => Some(SubtaskVerb::Install),
            "press_fit" => Some(SubtaskVerb::PressFit),
            "tighten" => Some(SubtaskVerb::Tighten),
            "inspect" => Some(SubtaskVerb::Inspect),
            _ => None,
        }
    }
}

impl fmt::Display for SubtaskVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Location,
    Object,
}

/// A scene node and its containment chain, node first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationRef {
    pub node: String,
    pub path: Vec<String>,
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
}

impl LocationRef {
    fn of(sg: &SceneGraph, node: &str) -> Self {
        let path = sg.containment_path(node);
        let names = sg.path_names(&path);
        let coordinates = path.iter().find_map(|id| sg.node(id).and_then(|n| n.coordinates));
        LocationRef {
            node: node.to_string(),
            path,
            names,
            coordinates,
        }
    }

    /// "Shelf 2 in Room 2": the enclosing containers, innermost first.
    pub fn describe_container(&self) -> String {
        self.names.iter().skip(1).cloned().collect::<Vec<_>>().join(" in ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    /// 1-based position in the list.
    pub index: usize,
    /// 1-based station.
    pub station: usize,
    /// 1-based step of the process this subtask belongs to.
    pub step: usize,
    pub process_id: String,
    pub verb: SubtaskVerb,
    /// Catalog id of the object acted on.
    pub object: Option<String>,
    pub tool: Option<String>,
    pub source: Option<LocationRef>,
    pub target: Option<LocationRef>,
    pub labels: BTreeSet<Label>,
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskList {
    pub product_id: String,
    pub stations: usize,
    pub assignment: Assignment,
    pub subtasks: Vec<Subtask>,
}

impl SubtaskList {
    /// Station of each process as recorded on its subtasks.
    pub fn process_stations(&self) -> BTreeMap<String, usize> {
        self.subtasks
            .iter()
            .map(|s| (s.process_id.clone(), s.station))
            .collect()
    }

    /// Checks that every referenced id resolves and that stations agree with
    /// the recorded assignment. Returns the problems found.
    pub fn verify(&self, kg: &KnowledgeGraph, sg: &SceneGraph) -> Vec<String> {
        let mut problems = Vec::new();
        if kg.entity(&self.product_id).is_none() {
            problems.push(format!("product {} not in the knowledge graph", self.product_id));
        }
        let by_assignment = self.assignment.station_map();
        for s in &self.subtasks {
            if kg.entity(&s.process_id).is_none() {
                problems.push(format!("subtask {}: process {} unknown", s.index, s.process_id));
            }
            if by_assignment.get(&s.process_id) != Some(&s.station) {
                problems.push(format!(
                    "subtask {}: station {} disagrees with the assignment",
                    s.index, s.station
                ));
            }
            for id in s.object.iter().chain(s.tool.iter()) {
                if kg.entity(id).is_none() {
                    problems.push(format!("subtask {}: catalog id {id} unknown", s.index));
                }
            }
            for loc in s.source.iter().chain(s.target.iter()) {
                for node in &loc.path {
                    if sg.node(node).is_none() {
                        problems.push(format!("subtask {}: scene node {node} unknown", s.index));
                    }
                }
            }
        }
        if by_assignment.len() != self.process_stations().len() {
            problems.push("assignment and subtask list cover different processes".into());
        }
        problems
    }

    pub fn label_counts(&self) -> (usize, usize, usize) {
        let loc = self
            .subtasks
            .iter()
            .filter(|s| s.labels.contains(&Label::Location))
            .count();
        let obj = self
            .subtasks
            .iter()
            .filter(|s| s.labels.contains(&Label::Object))
            .count();
        let any = self.subtasks.iter().filter(|s| !s.labels.is_empty()).count();
        (loc, obj, any)
    }
}

/// Location label for subtasks with a resolved source or target; Object
/// label for picks. Replaces any existing labels.
pub fn label_subtasks(mut list: SubtaskList) -> SubtaskList {
    for s in &mut list.subtasks {
        s.labels.clear();
        if s.source.is_some() || s.target.is_some() {
            s.labels.insert(Label::Location);
        }
        if s.verb == SubtaskVerb::Pick {
            s.labels.insert(Label::Object);
        }
    }
    list
}

/// Expands each process, station by station in assignment order, into:
/// a tool pick (nothing mounted) or switch (another tool mounted) per
/// required tool, a pick per part, and the operation itself. The operation
/// carries the process time and names a tool only when the process needs
/// one; only `place` names the workstation as target.
pub fn expand_subtasks(art: &Artifacts, sg: &SceneGraph) -> Result<SubtaskList, PlanError> {
    let product = art
        .product
        .as_ref()
        .ok_or_else(|| PlanError::Knowledge("no resolved product".into()))?;
    let assignment = art
        .assignment
        .as_ref()
        .ok_or_else(|| PlanError::Config("no accepted assignment".into()))?;
    let by_id: BTreeMap<&str, &super::ProcessFacts> = art.processes.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut subtasks = Vec::new();
    for (s, list) in assignment.stations.iter().enumerate() {
        let station = s + 1;
        let ws_id = art
            .workstations
            .get(s)
            .ok_or_else(|| PlanError::Scene(format!("no workstation for station {station}")))?;
        let ws = LocationRef::of(sg, ws_id);
        let mut mounted: Option<String> = None;
        for pid in list {
            let p = by_id
                .get(pid.as_str())
                .ok_or_else(|| PlanError::Knowledge(format!("assignment names unknown process {pid}")))?;
            let mut push = |verb, object: Option<String>, tool: Option<String>, source, target, duration_s| {
                subtasks.push(Subtask {
                    index: subtasks.len() + 1,
                    station,
                    step: p.step,
                    process_id: p.id.clone(),
                    verb,
                    object,
                    tool,
                    source,
                    target,
                    labels: BTreeSet::new(),
                    duration_s,
                });
            };
            for tool in &p.tools {
                if mounted.as_deref() == Some(tool.as_str()) {
                    continue;
                }
                let inst = pick_instance(art.locations.get(tool), sg, ws_id)
                    .ok_or_else(|| PlanError::Scene(format!("tool {tool} has no instance in the scene")))?;
                let verb = if mounted.is_none() {
                    SubtaskVerb::Pick
                } else {
                    SubtaskVerb::SwitchTool
                };
                let object = (verb == SubtaskVerb::Pick).then(|| tool.clone());
                push(
                    verb,
                    object,
                    Some(tool.clone()),
                    Some(LocationRef::of(sg, &inst.node)),
                    Some(ws.clone()),
                    None,
                );
                mounted = Some(tool.clone());
            }
            for part in &p.parts {
                let inst = pick_instance(art.locations.get(part), sg, ws_id)
                    .ok_or_else(|| PlanError::Scene(format!("part {part} has no instance in the scene")))?;
                push(
                    SubtaskVerb::Pick,
                    Some(part.clone()),
                    None,
                    Some(LocationRef::of(sg, &inst.node)),
                    Some(ws.clone()),
                    None,
                );
            }
            let verb = SubtaskVerb::from_process_verb(&p.verb)
                .ok_or_else(|| PlanError::Knowledge(format!("process {} has unknown verb {}", p.id, p.verb)))?;
            let object = p.reference_part.clone().or_else(|| p.parts.first().cloned());
            let target = (verb == SubtaskVerb::Place).then(|| ws.clone());
            let tool = if p.tools.is_empty() { None } else { mounted.clone() };
            push(verb, object, tool, None, target, p.duration_s);
        }
    }
    Ok(label_subtasks(SubtaskList {
        product_id: product.id.clone(),
        stations: assignment.stations.len(),
        assignment: assignment.clone(),
        subtasks,
    }))
}

/// Instance in the workstation's room if any, else the lowest node id.
fn pick_instance<'a>(candidates: Option<&'a Vec<Located>>, sg: &SceneGraph, ws_id: &str) -> Option<&'a Located> {
    let candidates = candidates?;
    let room = |path: &[String]| path.last().cloned();
    let ws_room = room(&sg.containment_path(ws_id));
    candidates
        .iter()
        .filter(|c| room(&c.path) == ws_room)
        .min_by(|a, b| a.node.cmp(&b.node))
        .or_else(|| candidates.iter().min_by(|a, b| a.node.cmp(&b.node)))
}

/// Numbered plan, one line per process.
pub fn render_plan(list: &SubtaskList, art: &Artifacts, kg: &KnowledgeGraph) -> String {
    let name = |id: &str| kg.entity(id).map_or_else(|| id.to_string(), |e| e.name.clone());
    let mut out = String::new();
    let mut line_no = 0;
    let mut i = 0;
    while i < list.subtasks.len() {
        let pid = &list.subtasks[i].process_id;
        let mut j = i;
        while j < list.subtasks.len() && &list.subtasks[j].process_id == pid {
            j += 1;
        }
        let group = &list.subtasks[i..j];
        let head = &group[0];
        let pname = art
            .processes
            .iter()
            .find(|p| &p.id == pid)
            .map_or_else(|| name(pid), |p| p.name.clone());
        let phrases: Vec<String> = group
            .iter()
            .map(|s| {
                let obj = s.object.as_deref().map(name);
                let from = s
                    .source
                    .as_ref()
                    .map(|l| format!(" from {}", l.describe_container()))
                    .unwrap_or_default();
                match s.verb {
                    SubtaskVerb::Pick => format!("pick {}{from}", obj.unwrap_or_default()),
                    SubtaskVerb::SwitchTool => {
                        format!("switch to {}{from}", s.tool.as_deref().map(name).unwrap_or_default())
                    }
                    verb => {
                        let mut p = verb.as_str().replace('_', "-");
                        if let Some(o) = obj {
                            p.push(' ');
                            p.push_str(&o);
                        }
                        if let Some(t) = &s.target {
                            p.push_str(&format!(" at {}", t.names[0]));
                        }
                        if let Some(tool) = &s.tool {
                            p.push_str(&format!(" with {}", name(tool)));
                        }
                        if let Some(d) = s.duration_s {
                            p.push_str(&format!(" ({d} s)"));
                        }
                        p
                    }
                }
            })
            .collect();
        line_no += 1;
        out.push_str(&format!(
            "{line_no}. At workstation {}, perform Step {}: {}: {}.\n",
            head.station,
            head.step,
            pname,
            phrases.join(", then ")
        ));
        i = j;
    }
    out
}
