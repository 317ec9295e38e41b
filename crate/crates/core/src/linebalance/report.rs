use serde::{Deserialize, Serialize};

use super::instance::{precedence_violations, Assignment, BalanceInstance};
use super::BalanceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Precedence {
        pred: String,
        succ: String,
    },
    /// `station` is 1-based; `overload` is `load - limit` and may be zero,
    /// since a load equal to the limit already breaks it.
    CycleTime {
        station: usize,
        load: f64,
        limit: f64,
        overload: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub stations: usize,
    pub loads: Vec<f64>,
    pub ct: f64,
    pub lbr: f64,
    pub nwu: usize,
    pub tct: Option<u32>,
    pub nitc: Option<usize>,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl BalanceReport {
    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }

    /// Summed excess over the limit across violating stations.
    pub fn total_overload(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| match v {
                Violation::CycleTime { overload, .. } => *overload,
                Violation::Precedence { .. } => 0.0,
            })
            .sum()
    }

    pub fn precedence_pairs(&self) -> Vec<(String, String)> {
        self.violations
            .iter()
            .filter_map(|v| match v {
                Violation::Precedence { pred, succ } => Some((pred.clone(), succ.clone())),
                Violation::CycleTime { .. } => None,
            })
            .collect()
    }
}

/// Computes loads, CT, LBR, NWU and TCT for `a`, listing every precedence and
/// cycle-time breach. Rejects assignments that miss, repeat or invent tasks.
pub fn evaluate(inst: &BalanceInstance, a: &Assignment) -> Result<BalanceReport, BalanceError> {
    let station_of = inst.station_vector(a)?;
    let m = inst.stations();
    let mut loads = vec![0.0; m];
    for (i, &s) in station_of.iter().enumerate() {
        loads[s] += inst.duration(i);
    }
    let ct = loads.iter().copied().fold(0.0, f64::max);
    let total: f64 = loads.iter().sum();
    let lbr = total / (m as f64 * ct) * 100.0;
    let nwu = loads.iter().filter(|&&l| l > 0.0).count();

    let mut violations: Vec<Violation> = precedence_violations(inst.tasks(), a)
        .into_iter()
        .map(|(pred, succ)| Violation::Precedence { pred, succ })
        .collect();
    if let Some(limit) = inst.ct_limit() {
        for (s, &load) in loads.iter().enumerate() {
            if !inst.within_limit(load) {
                violations.push(Violation::CycleTime {
                    station: s + 1,
                    load,
                    limit,
                    overload: load - limit,
                });
            }
        }
    }
    let tct = inst.has_tools().then(|| tool_changes(inst, a));
    Ok(BalanceReport {
        stations: m,
        loads,
        ct,
        lbr,
        nwu,
        tct,
        nitc: None,
        feasible: violations.is_empty(),
        violations,
    })
}

/// Tool changes: per station, one initial mount if the first task needs a
/// tool, plus one per consecutive pair needing different non-null tools.
pub fn tool_changes(inst: &BalanceInstance, a: &Assignment) -> u32 {
    let tool = |id: &str| inst.task_index(id).and_then(|i| inst.tasks()[i].tool.as_deref());
    let mut changes = 0;
    for list in &a.stations {
        if list.first().and_then(|id| tool(id)).is_some() {
            changes += 1;
        }
        for pair in list.windows(2) {
            if let (Some(x), Some(y)) = (tool(&pair[0]), tool(&pair[1])) {
                if x != y {
                    changes += 1;
                }
            }
        }
    }
    changes
}

/// Aligned text table with columns NITC, NWU, CT, TCT, LBR; one row per method.
pub fn render_table(rows: &[(String, BalanceReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Method".len());
    let mut out = format!(
        "{:<name_w$}  {:>6}  {:>4}  {:>8}  {:>4}  {:>7}\n",
        "Method", "NITC", "NWU", "CT", "TCT", "LBR(%)"
    );
    for (name, r) in rows {
        let nitc = r.nitc.map_or("-".to_string(), |n| n.to_string());
        let tct = r.tct.map_or("-".to_string(), |n| n.to_string());
        out.push_str(&format!(
            "{:<name_w$}  {:>6}  {:>4}  {:>8}  {:>4}  {:>7.1}\n",
            name,
            nitc,
            r.nwu,
            fmt_seconds(r.ct),
            tct,
            r.lbr
        ));
    }
    out
}

fn fmt_seconds(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
