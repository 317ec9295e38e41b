use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BalanceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTask {
    pub id: String,
    pub duration_s: f64,
    #[serde(default)]
    pub predecessors: BTreeSet<String>,
    #[serde(default)]
    pub tool: Option<String>,
}

impl BalanceTask {
    pub fn new<I, S>(id: impl Into<String>, duration_s: f64, predecessors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        BalanceTask {
            id: id.into(),
            duration_s,
            predecessors: predecessors.into_iter().map(Into::into).collect(),
            tool: None,
        }
    }

    pub fn with_tool(mut self, tool: impl Into<String>) -> Self {
        self.tool = Some(tool.into());
        self
    }
}

/// A validated precedence-constrained task set with a fixed station count.
///
/// Construction checks ids, durations and acyclicity once and caches index
/// based adjacency plus a canonical topological order (Kahn's algorithm,
/// lowest input position first), which every solver shares.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceInstance {
    tasks: Vec<BalanceTask>,
    stations: usize,
    ct_limit: Option<f64>,
    index: HashMap<String, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    duration_s: f64,
    #[serde(default)]
    predecessors: String,
    #[serde(default)]
    tool: String,
}

impl BalanceInstance {
    pub fn new(tasks: Vec<BalanceTask>, stations: usize, ct_limit: Option<f64>) -> Result<Self, BalanceError> {
        let invalid = |msg: String| Err(BalanceError::InvalidInstance(msg));
        if tasks.is_empty() {
            return invalid("instance has no tasks".into());
        }
        if stations == 0 {
            return invalid("station count must be at least 1".into());
        }
        if let Some(limit) = ct_limit {
            if !limit.is_finite() || limit <= 0.0 {
                return invalid(format!("cycle-time limit must be positive, got {limit}"));
            }
        }
        let mut index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.id.clone(), i).is_some() {
                return invalid(format!("duplicate task id `{}`", t.id));
            }
            if !t.duration_s.is_finite() || t.duration_s <= 0.0 {
                return invalid(format!("task `{}` has non-positive duration", t.id));
            }
            if t.predecessors.contains(&t.id) {
                return invalid(format!("task `{}` lists itself as predecessor", t.id));
            }
        }
        let n = tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (j, t) in tasks.iter().enumerate() {
            for p in &t.predecessors {
                let Some(&i) = index.get(p) else {
                    return invalid(format!("task `{}` has unknown predecessor `{p}`", t.id));
                };
                preds[j].push(i);
                succs[i].push(j);
            }
        }
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            topo.push(i);
            for &j in &succs[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if topo.len() != n {
            return invalid("precedence graph contains a cycle".into());
        }
        Ok(BalanceInstance {
            tasks,
            stations,
            ct_limit,
            index,
            preds,
            succs,
            topo,
        })
    }

    /// Reads the `id,duration_s,predecessors,tool` CSV format.
    pub fn from_csv_reader<R: std::io::Read>(
        reader: R,
        stations: usize,
        ct_limit: Option<f64>,
        source: &str,
    ) -> Result<Self, BalanceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut tasks = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row.map_err(|e| BalanceError::Csv {
                path: source.to_string(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let predecessors = row
                .predecessors
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            tasks.push(BalanceTask {
                id: row.id,
                duration_s: row.duration_s,
                predecessors,
                tool: Some(row.tool).filter(|t| !t.is_empty()),
            });
        }
        Self::new(tasks, stations, ct_limit)
    }

    pub fn from_csv(path: &Path, stations: usize, ct_limit: Option<f64>) -> Result<Self, BalanceError> {
        let file = std::fs::File::open(path).map_err(|e| BalanceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv_reader(file, stations, ct_limit, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,duration_s,predecessors,tool\n");
        for t in &self.tasks {
            let preds: Vec<&str> = self.preds[self.index[&t.id]]
                .iter()
                .map(|&i| self.tasks[i].id.as_str())
                .collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.id,
                t.duration_s,
                preds.join(";"),
                t.tool.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn with_stations(&self, stations: usize) -> Result<Self, BalanceError> {
        Self::new(self.tasks.clone(), stations, self.ct_limit)
    }

    pub fn with_ct_limit(&self, ct_limit: Option<f64>) -> Result<Self, BalanceError> {
        Self::new(self.tasks.clone(), self.stations, ct_limit)
    }

    pub fn tasks(&self) -> &[BalanceTask] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    pub fn ct_limit(&self) -> Option<f64> {
        self.ct_limit
    }

    pub fn total_work(&self) -> f64 {
        self.tasks.iter().map(|t| t.duration_s).sum()
    }

    pub fn duration(&self, i: usize) -> f64 {
        self.tasks[i].duration_s
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.tasks[i].id
    }

    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Pigeonhole lower bound on the cycle time: max(ceil(total / m), longest task).
    pub fn lower_bound_ct(&self) -> f64 {
        lower_bound_ct(self.total_work(), self.stations, self.max_duration())
    }

    pub fn max_duration(&self) -> f64 {
        self.tasks.iter().map(|t| t.duration_s).fold(0.0, f64::max)
    }

    pub fn has_tools(&self) -> bool {
        self.tasks.iter().any(|t| t.tool.is_some())
    }

    /// Whether a station load satisfies the cycle-time limit (strictly below it).
    pub fn within_limit(&self, load: f64) -> bool {
        self.ct_limit.is_none_or(|limit| load < limit)
    }

    /// Builds an [`Assignment`] from a 0-based station per task, ordering each
    /// station by the canonical topological order.
    pub fn assignment_from_stations(&self, station_of: &[usize]) -> Assignment {
        let mut stations = vec![Vec::new(); self.stations];
        for &i in &self.topo {
            stations[station_of[i]].push(self.tasks[i].id.clone());
        }
        Assignment { stations }
    }

    /// 0-based station per task index.
    pub fn station_vector(&self, a: &Assignment) -> Result<Vec<usize>, BalanceError> {
        if a.stations.len() > self.stations {
            return Err(BalanceError::StationCount {
                expected: self.stations,
                got: a.stations.len(),
            });
        }
        let mut out = vec![usize::MAX; self.tasks.len()];
        for (s, list) in a.stations.iter().enumerate() {
            for id in list {
                let i = self
                    .task_index(id)
                    .ok_or_else(|| BalanceError::UnknownTask(id.clone()))?;
                if out[i] != usize::MAX {
                    return Err(BalanceError::DuplicateTask(id.clone()));
                }
                out[i] = s;
            }
        }
        if let Some(i) = out.iter().position(|&s| s == usize::MAX) {
            return Err(BalanceError::Unassigned(self.tasks[i].id.clone()));
        }
        Ok(out)
    }
}

pub fn lower_bound_ct(total: f64, stations: usize, longest: f64) -> f64 {
    let per_station = total / stations as f64;
    // Integral durations admit the rounded-up bound.
    let per_station = if total.fract() == 0.0 {
        per_station.ceil()
    } else {
        per_station
    };
    per_station.max(longest)
}

/// Ordered task lists per station; `stations[0]` is station 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub stations: Vec<Vec<String>>,
}

impl Assignment {
    pub fn new(stations: Vec<Vec<String>>) -> Self {
        Assignment { stations }
    }

    pub fn from_ids<S: AsRef<str>>(stations: &[&[S]]) -> Self {
        Assignment {
            stations: stations
                .iter()
                .map(|s| s.iter().map(|id| id.as_ref().to_string()).collect())
                .collect(),
        }
    }

    /// 1-based station of `id`.
    pub fn station_of(&self, id: &str) -> Option<usize> {
        self.stations
            .iter()
            .position(|s| s.iter().any(|t| t == id))
            .map(|s| s + 1)
    }

    pub fn task_count(&self) -> usize {
        self.stations.iter().map(Vec::len).sum()
    }

    /// Task id → 1-based station.
    pub fn station_map(&self) -> BTreeMap<String, usize> {
        let mut map = BTreeMap::new();
        for (s, list) in self.stations.iter().enumerate() {
            for id in list {
                map.insert(id.clone(), s + 1);
            }
        }
        map
    }
}

/// Precedence pairs `(pred, succ)` that `a` breaks: the predecessor sits on a
/// later station, or on the same station but not earlier in its sequence.
///
/// Works from task ids alone so that it stays independent of the solvers'
/// index bookkeeping.
pub fn precedence_violations(tasks: &[BalanceTask], a: &Assignment) -> Vec<(String, String)> {
    let mut position: HashMap<&str, (usize, usize)> = HashMap::new();
    for (s, list) in a.stations.iter().enumerate() {
        for (k, id) in list.iter().enumerate() {
            position.insert(id.as_str(), (s, k));
        }
    }
    let mut out = Vec::new();
    for t in tasks {
        let Some(&succ_pos) = position.get(t.id.as_str()) else {
            continue;
        };
        for p in &t.predecessors {
            let Some(&pred_pos) = position.get(p.as_str()) else {
                continue;
            };
            if pred_pos >= succ_pos {
                out.push((p.clone(), t.id.clone()));
            }
        }
    }
    out
}
