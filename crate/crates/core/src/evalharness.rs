//! Metric computation over QA answers, balancing runs and plans.
//!
//! Every reported figure is recomputed here from raw inputs: question
//! outcomes, station loads, and subtask sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linebalance::{BalanceInstance, BalanceReport};
use crate::orchestrator::{Label, SubtaskList};

/// Relative tolerance when comparing a producer's metric with the recomputed one.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no results to score")]
    Empty,
    #[error("no {0} questions; class accuracy is undefined")]
    EmptyClass(Hop),
    #[error("weights must be non-negative and sum to 1, got {single} + {multi}")]
    Weights { single: f64, multi: f64 },
    #[error("accuracy {value} for {qtype} is outside [0, 1]")]
    AccuracyRange { qtype: QuestionType, value: f64 },
    #[error("task ids differ; only in produced: [{}], only in gold: [{}]", produced_only.join(", "), gold_only.join(", "))]
    Orphans {
        produced_only: Vec<String>,
        gold_only: Vec<String>,
    },
    #[error("duplicate task id {0}")]
    DuplicateTask(String),
    #[error("reports come from different instances: {0}")]
    MixedInstances(String),
    #[error("{method}: reported {metric} {reported} but loads give {recomputed}")]
    Mismatch {
        method: String,
        metric: &'static str,
        reported: f64,
        recomputed: f64,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    Single,
    Multi,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hop::Single => "single-hop",
            Hop::Multi => "multi-hop",
        })
    }
}

/// The six question types, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    OverallProcess,
    Applicability,
    SequenceComparison,
    SequenceLinking,
    RequirementQuery,
    RelationComparison,
}

impl QuestionType {
    pub const ALL: [QuestionType; 6] = [
        QuestionType::OverallProcess,
        QuestionType::Applicability,
        QuestionType::SequenceComparison,
        QuestionType::SequenceLinking,
        QuestionType::RequirementQuery,
        QuestionType::RelationComparison,
    ];

    pub fn hop(self) -> Hop {
        match self {
            QuestionType::OverallProcess | QuestionType::Applicability => Hop::Single,
            _ => Hop::Multi,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            QuestionType::OverallProcess => "Overall process understanding",
            QuestionType::Applicability => "Process applicability",
            QuestionType::SequenceComparison => "Sequence comparison",
            QuestionType::SequenceLinking => "Sequence linking",
            QuestionType::RequirementQuery => "Requirement query",
            QuestionType::RelationComparison => "Relation comparison",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub question: String,
    pub gold: String,
}

/// Reads one item per non-blank line.
pub fn load_qa_items(path: &Path) -> Result<Vec<QaItem>, EvalError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let mut items = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            path: shown.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Casefolds and collapses whitespace.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    NormalizedMatch,
    /// Correctness supplied from outside, e.g. a human-checked label.
    PreJudged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResult {
    pub item: QaItem,
    pub produced: String,
    pub correct: bool,
    pub judged_by: Judgment,
}

impl QaResult {
    pub fn judge(item: QaItem, produced: impl Into<String>) -> Self {
        let produced = produced.into();
        let correct = normalize_answer(&produced) == normalize_answer(&item.gold);
        QaResult {
            item,
            produced,
            correct,
            judged_by: Judgment::NormalizedMatch,
        }
    }

    pub fn prejudged(item: QaItem, produced: impl Into<String>, correct: bool) -> Self {
        QaResult {
            item,
            produced: produced.into(),
            correct,
            judged_by: Judgment::PreJudged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub qtype: QuestionType,
    pub questions: usize,
    pub accuracy: f64,
}

impl TypeAccuracy {
    pub fn new(qtype: QuestionType, questions: usize, accuracy: f64) -> Self {
        TypeAccuracy {
            qtype,
            questions,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAccuracy {
    /// Types with at least one question, in table order.
    pub per_type: Vec<TypeAccuracy>,
    pub correct: usize,
    pub total: usize,
    pub overall: f64,
}

pub fn qa_accuracy(results: &[QaResult]) -> Result<QaAccuracy, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut tally: BTreeMap<QuestionType, (usize, usize)> = BTreeMap::new();
    for r in results {
        let e = tally.entry(r.item.qtype).or_default();
        e.0 += usize::from(r.correct);
        e.1 += 1;
    }
    let per_type = tally
        .into_iter()
        .map(|(qtype, (c, n))| TypeAccuracy::new(qtype, n, c as f64 / n as f64))
        .collect();
    let correct = results.iter().filter(|r| r.correct).count();
    Ok(QaAccuracy {
        per_type,
        correct,
        total: results.len(),
        overall: correct as f64 / results.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopWeights {
    pub single: f64,
    pub multi: f64,
}

impl Default for HopWeights {
    fn default() -> Self {
        HopWeights {
            single: 0.5,
            multi: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtwaReport {
    pub sha: f64,
    pub mha: f64,
    pub ptwa: f64,
    pub weights: HopWeights,
    /// How type accuracies were pooled into the hop classes.
    pub aggregation: String,
}

/// Pools type accuracies into single- and multi-hop accuracy, weighting each
/// type by its question count, then mixes the two classes by `weights`.
pub fn ptwa(per_type: &[TypeAccuracy], weights: HopWeights) -> Result<PtwaReport, EvalError> {
    let HopWeights { single, multi } = weights;
    if single < 0.0 || multi < 0.0 || ((single + multi) - 1.0).abs() > 1e-12 {
        return Err(EvalError::Weights { single, multi });
    }
    for t in per_type {
        if !(0.0..=1.0).contains(&t.accuracy) {
            return Err(EvalError::AccuracyRange {
                qtype: t.qtype,
                value: t.accuracy,
            });
        }
    }
    let class = |hop: Hop| {
        let (hits, n) = per_type
            .iter()
            .filter(|t| t.qtype.hop() == hop)
            .fold((0.0, 0usize), |(h, n), t| {
                (h + t.accuracy * t.questions as f64, n + t.questions)
            });
        if n == 0 {
            Err(EvalError::EmptyClass(hop))
        } else {
            Ok(hits / n as f64)
        }
    };
    let sha = class(Hop::Single)?;
    let mha = class(Hop::Multi)?;
    Ok(PtwaReport {
        sha,
        mha,
        ptwa: single * sha + multi * mha,
        weights,
        aggregation: "question-count weighted within each hop class".into(),
    })
}

/// One subtask as the accuracy levels see it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedSubtask {
    pub verb: String,
    pub object: Option<String>,
    pub station: usize,
    /// Containment path of the subtask's location, outermost first, joined by `/`.
    pub location: Option<String>,
    #[serde(default)]
    pub labels: BTreeSet<Label>,
}

impl JudgedSubtask {
    fn core(&self) -> (&str, Option<&str>, usize) {
        (&self.verb, self.object.as_deref(), self.station)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub task_id: String,
    pub subtasks: Vec<JudgedSubtask>,
}

impl TaskPlan {
    /// The location of a subtask is its source when it has one, else its target.
    pub fn from_subtasks(task_id: impl Into<String>, list: &SubtaskList) -> Self {
        let subtasks = list
            .subtasks
            .iter()
            .map(|s| JudgedSubtask {
                verb: s.verb.as_str().to_string(),
                object: s.object.clone(),
                station: s.station,
                location: s.source.as_ref().or(s.target.as_ref()).map(|l| {
                    let mut path = l.path.clone();
                    path.reverse();
                    path.join("/")
                }),
                labels: s.labels.clone(),
            })
            .collect();
        TaskPlan {
            task_id: task_id.into(),
            subtasks,
        }
    }
}

pub fn load_task_plans(path: &Path) -> Result<Vec<TaskPlan>, EvalError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Parse {
        path: shown,
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl LevelAccuracy {
    fn of(correct: usize, total: usize) -> Self {
        let accuracy = if total == 0 { 1.0 } else { correct as f64 / total as f64 };
        LevelAccuracy {
            correct,
            total,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAccuracy {
    pub task: LevelAccuracy,
    pub subtask: LevelAccuracy,
    pub location: LevelAccuracy,
    pub object: LevelAccuracy,
}

/// Four-level accuracy of produced plans against gold, matched by task id.
///
/// Subtasks are compared by position. A task is correct when its sequence
/// equals gold in verb, object, station and location. Levels with no gold
/// items score 1.
pub fn plan_accuracy(produced: &[TaskPlan], gold: &[TaskPlan]) -> Result<PlanAccuracy, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let index = |plans: &[TaskPlan]| -> Result<BTreeMap<String, usize>, EvalError> {
        let mut map = BTreeMap::new();
        for (i, p) in plans.iter().enumerate() {
            if map.insert(p.task_id.clone(), i).is_some() {
                return Err(EvalError::DuplicateTask(p.task_id.clone()));
            }
        }
        Ok(map)
    };
    let prod_ix = index(produced)?;
    let gold_ix = index(gold)?;
    let produced_only: Vec<String> = prod_ix.keys().filter(|k| !gold_ix.contains_key(*k)).cloned().collect();
    let gold_only: Vec<String> = gold_ix.keys().filter(|k| !prod_ix.contains_key(*k)).cloned().collect();
    if !produced_only.is_empty() || !gold_only.is_empty() {
        return Err(EvalError::Orphans {
            produced_only,
            gold_only,
        });
    }

    let (mut tasks_ok, mut sub_ok, mut sub_n, mut loc_ok, mut loc_n, mut obj_ok, mut obj_n) = (0, 0, 0, 0, 0, 0, 0);
    for (id, &gi) in &gold_ix {
        let g = &gold[gi].subtasks;
        let p = &produced[prod_ix[id]].subtasks;
        let whole = g.len() == p.len()
            && g.iter()
                .zip(p)
                .all(|(a, b)| a.core() == b.core() && a.location == b.location);
        tasks_ok += usize::from(whole);
        for (i, gs) in g.iter().enumerate() {
            let ps = p.get(i);
            sub_n += 1;
            sub_ok += usize::from(ps.is_some_and(|ps| ps.core() == gs.core()));
            if gs.labels.contains(&Label::Location) {
                loc_n += 1;
                loc_ok += usize::from(ps.is_some_and(|ps| ps.location == gs.location));
            }
            if gs.labels.contains(&Label::Object) {
                obj_n += 1;
                obj_ok += usize::from(ps.is_some_and(|ps| ps.object == gs.object));
            }
        }
    }
    Ok(PlanAccuracy {
        task: LevelAccuracy::of(tasks_ok, gold.len()),
        subtask: LevelAccuracy::of(sub_ok, sub_n),
        location: LevelAccuracy::of(loc_ok, loc_n),
        object: LevelAccuracy::of(obj_ok, obj_n),
    })
}

/// Percentages rounded to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanAccuracyPercent {
    pub task: f64,
    pub subtask: f64,
    pub location: f64,
    pub object: f64,
}

pub fn percent2(fraction: f64) -> f64 {
    (fraction * 10000.0).round() / 100.0
}

impl From<&PlanAccuracy> for PlanAccuracyPercent {
    fn from(a: &PlanAccuracy) -> Self {
        PlanAccuracyPercent {
            task: percent2(a.task.accuracy),
            subtask: percent2(a.subtask.accuracy),
            location: percent2(a.location.accuracy),
            object: percent2(a.object.accuracy),
        }
    }
}

/// Repeated runs of the same plan evaluation with their per-level mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub runs: Vec<PlanAccuracy>,
    pub mean: PlanAccuracyPercent,
}

pub fn plan_accuracy_runs(runs: Vec<PlanAccuracy>) -> Result<RunSeries, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = runs.len() as f64;
    let mean = |f: fn(&PlanAccuracy) -> f64| percent2(runs.iter().map(f).sum::<f64>() / n);
    let mean = PlanAccuracyPercent {
        task: mean(|a| a.task.accuracy),
        subtask: mean(|a| a.subtask.accuracy),
        location: mean(|a| a.location.accuracy),
        object: mean(|a| a.object.accuracy),
    };
    Ok(RunSeries { runs, mean })
}

/// Line balancing rate in percent.
pub fn lbr_percent(total_work: f64, stations: usize, ct: f64) -> f64 {
    total_work / (stations as f64 * ct) * 100.0
}

/// Identifies the instance a report was produced on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceKey {
    pub tasks: Vec<(String, f64)>,
    pub stations: usize,
}

impl InstanceKey {
    pub fn of(inst: &BalanceInstance) -> Self {
        InstanceKey {
            tasks: inst.tasks().iter().map(|t| (t.id.clone(), t.duration_s)).collect(),
            stations: inst.stations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRun {
    pub method: String,
    pub instance: InstanceKey,
    pub report: BalanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub method: String,
    pub nitc: Option<usize>,
    pub nwu: usize,
    pub ct: f64,
    pub tct: Option<u32>,
    pub lbr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceTable {
    pub stations: usize,
    pub total_work: f64,
    pub rows: Vec<BalanceRow>,
}

impl BalanceTable {
    pub fn render(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(0)
            .max("Method".len());
        let mut out = format!(
            "{:<name_w$}  {:>6}  {:>4}  {:>8}  {:>4}  {:>7}\n",
            "Method", "NITC", "NWU", "CT", "TCT", "LBR(%)"
        );
        for r in &self.rows {
            let dash = |v: Option<String>| v.unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<name_w$}  {:>6}  {:>4}  {:>8}  {:>4}  {:>7.1}\n",
                r.method,
                dash(r.nitc.map(|n| n.to_string())),
                r.nwu,
                if r.ct.fract() == 0.0 {
                    format!("{:.0}", r.ct)
                } else {
                    format!("{:.2}", r.ct)
                },
                dash(r.tct.map(|n| n.to_string())),
                r.lbr
            ));
        }
        out
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RECOMPUTE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Comparison table with CT, NWU and LBR recomputed from each report's
/// loads. Rejects runs from different instances and reports whose own
/// figures disagree with their loads.
pub fn balance_report_table(runs: &[BalanceRun]) -> Result<BalanceTable, EvalError> {
    let first = runs.first().ok_or(EvalError::Empty)?;
    if let Some(other) = runs.iter().find(|r| r.instance != first.instance) {
        return Err(EvalError::MixedInstances(format!(
            "{} vs {}",
            first.method, other.method
        )));
    }
    let m = first.instance.stations;
    let total_work: f64 = first.instance.tasks.iter().map(|t| t.1).sum();
    let mut rows = Vec::new();
    for run in runs {
        let r = &run.report;
        let load_sum: f64 = r.loads.iter().sum();
        let ct = r.loads.iter().copied().fold(0.0, f64::max);
        let lbr = lbr_percent(load_sum, m, ct);
        let nwu = r.loads.iter().filter(|&&l| l > 0.0).count();
        let mismatch = |metric, reported, recomputed| EvalError::Mismatch {
            method: run.method.clone(),
            metric,
            reported,
            recomputed,
        };
        if r.loads.len() != m {
            return Err(mismatch("station count", r.loads.len() as f64, m as f64));
        }
        if !close(load_sum, total_work) {
            return Err(mismatch("total load", load_sum, total_work));
        }
        if !close(r.ct, ct) {
            return Err(mismatch("CT", r.ct, ct));
        }
        if !close(r.lbr, lbr) {
            return Err(mismatch("LBR", r.lbr, lbr));
        }
        if r.nwu != nwu {
            return Err(mismatch("NWU", r.nwu as f64, nwu as f64));
        }
        rows.push(BalanceRow {
            method: run.method.clone(),
            nitc: r.nitc,
            nwu,
            ct,
            tct: r.tct,
            lbr,
        });
    }
    Ok(BalanceTable {
        stations: m,
        total_work,
        rows,
    })
}

/// All question-answering and planning metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa: Option<QaAccuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ptwa: Option<PtwaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanAccuracy>,
}

impl AccuracyReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(qa) = &self.qa {
            out.push_str(&format!(
                "{:<44}  {:>9}  {:>8}\n",
                "Question type", "Questions", "Accuracy"
            ));
            for t in &qa.per_type {
                out.push_str(&format!(
                    "{:<44}  {:>9}  {:>7.2}%\n",
                    format!("{} ({})", t.qtype, t.qtype.hop()),
                    t.questions,
                    t.accuracy * 100.0
                ));
            }
            out.push_str(&format!(
                "{:<44}  {:>9}  {:>7.2}%\n",
                "Overall",
                qa.total,
                qa.overall * 100.0
            ));
        }
        if let Some(p) = &self.ptwa {
            out.push_str(&format!(
                "SHA {:.4}  MHA {:.4}  PTWA {:.4}  ({}; weights {}/{})\n",
                p.sha, p.mha, p.ptwa, p.aggregation, p.weights.single, p.weights.multi
            ));
        }
        if let Some(plan) = &self.plan {
            out.push_str(&format!(
                "{:<9}  {:>7}  {:>5}  {:>8}\n",
                "Level", "Correct", "Total", "Accuracy"
            ));
            for (name, l) in [
                ("Task", plan.task),
                ("Subtask", plan.subtask),
                ("Location", plan.location),
                ("Object", plan.object),
            ] {
                out.push_str(&format!(
                    "{:<9}  {:>7}  {:>5}  {:>7.2}%\n",
                    name,
                    l.correct,
                    l.total,
                    percent2(l.accuracy)
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(qtype: QuestionType, gold: &str) -> QaItem {
        QaItem {
            id: "q".into(),
            qtype,
            question: "?".into(),
            gold: gold.into(),
        }
    }

    #[test]
    fn normalized_match_ignores_case_and_spacing() {
        let r = QaResult::judge(
            item(QuestionType::OverallProcess, "Cut cable -> Strip"),
            "  cut  CABLE -> strip ",
        );
        assert!(r.correct);
        assert!(!QaResult::judge(item(QuestionType::OverallProcess, "a"), "b").correct);
    }

    #[test]
    fn qa_accuracy_ratios() {
        assert_eq!(qa_accuracy(&[]), Err(EvalError::Empty));
        let results: Vec<_> = [true, true, true, false]
            .iter()
            .map(|&c| QaResult::prejudged(item(QuestionType::SequenceLinking, "x"), "x", c))
            .collect();
        let acc = qa_accuracy(&results).unwrap();
        assert_eq!(acc.overall, 0.75);
        assert_eq!(
            acc.per_type,
            vec![TypeAccuracy::new(QuestionType::SequenceLinking, 4, 0.75)]
        );
        let wrong: Vec<_> = (0..3)
            .map(|_| QaResult::prejudged(item(QuestionType::Applicability, "x"), "y", false))
            .collect();
        assert_eq!(qa_accuracy(&wrong).unwrap().overall, 0.0);
    }

    #[test]
    fn ptwa_weight_checks() {
        let per_type = [
            TypeAccuracy::new(QuestionType::OverallProcess, 10, 1.0),
            TypeAccuracy::new(QuestionType::SequenceLinking, 10, 0.0),
        ];
        let r = ptwa(&per_type, HopWeights::default()).unwrap();
        assert_eq!((r.sha, r.mha, r.ptwa), (1.0, 0.0, 0.5));
        assert!(ptwa(
            &per_type,
            HopWeights {
                single: 0.7,
                multi: 0.7
            }
        )
        .is_err());
        assert_eq!(
            ptwa(&per_type[..1], HopWeights::default()),
            Err(EvalError::EmptyClass(Hop::Multi))
        );
    }

    fn sub(verb: &str, object: &str, station: usize) -> JudgedSubtask {
        JudgedSubtask {
            verb: verb.into(),
            object: Some(object.into()),
            station,
            location: Some("room_1/shelf_1".into()),
            labels: [Label::Location, Label::Object].into_iter().collect(),
        }
    }

    #[test]
    fn plan_accuracy_levels() {
        let gold = vec![
            TaskPlan {
                task_id: "a".into(),
                subtasks: vec![sub("pick", "x", 1), sub("install", "x", 1)],
            },
            TaskPlan {
                task_id: "b".into(),
                subtasks: vec![sub("pick", "y", 2)],
            },
        ];
        let mut produced = gold.clone();
        produced[0].subtasks[1].object = Some("z".into());
        let acc = plan_accuracy(&produced, &gold).unwrap();
        assert_eq!((acc.task.correct, acc.task.total), (1, 2));
        assert_eq!((acc.subtask.correct, acc.subtask.total), (2, 3));
        assert_eq!((acc.object.correct, acc.location.correct), (2, 3));

        produced.reverse();
        assert_eq!(plan_accuracy(&produced, &gold).unwrap(), acc);

        produced[0].task_id = "c".into();
        assert!(matches!(
            plan_accuracy(&produced, &gold),
            Err(EvalError::Orphans { .. })
        ));
    }

    #[test]
    fn run_means_round_to_two_decimals() {
        let level = |c, t| LevelAccuracy::of(c, t);
        let run = |task| PlanAccuracy {
            task: level(task, 19),
            subtask: level(1, 1),
            location: level(1, 1),
            object: level(1, 1),
        };
        let series = plan_accuracy_runs(vec![run(12), run(13)]).unwrap();
        assert_eq!(series.mean.task, 65.79);
        assert_eq!(series.mean.subtask, 100.0);
    }
}
