use super::instance::{Assignment, BalanceInstance};
use super::report::{evaluate, BalanceReport};
use super::BalanceError;

/// Largest instance the exact solver accepts.
pub const ORACLE_MAX_TASKS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub assignment: Assignment,
    pub report: BalanceReport,
    /// Search nodes explored; also stored in `report.nitc`.
    pub nodes: usize,
}

/// Minimum cycle time for the instance's fixed station count.
///
/// Depth-first branch-and-bound assigning tasks in canonical topological
/// order, each to a station no earlier than its predecessors'. Stations are
/// tried lowest first and only strict improvements replace the incumbent, so
/// the first optimum found in that order is returned. The cycle-time limit
/// does not steer the search; the report flags whether the optimum meets it.
pub fn solve_oracle(inst: &BalanceInstance) -> Result<OracleResult, BalanceError> {
    if inst.len() > ORACLE_MAX_TASKS {
        return Err(BalanceError::TooLarge {
            tasks: inst.len(),
            bound: ORACLE_MAX_TASKS,
        });
    }
    let mut search = Search {
        inst,
        integral: inst.tasks().iter().all(|t| t.duration_s.fract() == 0.0),
        station_of: vec![usize::MAX; inst.len()],
        loads: vec![0.0; inst.stations()],
        best_ct: f64::INFINITY,
        best: Vec::new(),
        nodes: 0,
    };
    search.dfs(0);
    let assignment = inst.assignment_from_stations(&search.best);
    let mut report = evaluate(inst, &assignment)?;
    report.nitc = Some(search.nodes);
    tracing::debug!(ct = report.ct, nodes = search.nodes, "oracle finished");
    Ok(OracleResult {
        assignment,
        report,
        nodes: search.nodes,
    })
}

struct Search<'a> {
    inst: &'a BalanceInstance,
    integral: bool,
    station_of: Vec<usize>,
    loads: Vec<f64>,
    best_ct: f64,
    best: Vec<usize>,
    nodes: usize,
}

impl Search<'_> {
    fn dfs(&mut self, pos: usize) {
        self.nodes += 1;
        let order = self.inst.topo_order();
        if pos == order.len() {
            let ct = self.loads.iter().copied().fold(0.0, f64::max);
            if ct < self.best_ct {
                self.best_ct = ct;
                self.best = self.station_of.clone();
            }
            return;
        }
        let task = order[pos];
        let d = self.inst.duration(task);
        let lo = self
            .inst
            .preds(task)
            .iter()
            .map(|&p| self.station_of[p])
            .max()
            .unwrap_or(0);
        for s in lo..self.loads.len() {
            if self.loads[s] + d >= self.best_ct {
                continue;
            }
            self.loads[s] += d;
            self.station_of[task] = s;
            if self.bound(pos + 1) < self.best_ct {
                self.dfs(pos + 1);
            }
            self.station_of[task] = usize::MAX;
            self.loads[s] -= d;
        }
    }

    /// Lower bound on the final CT given tasks `order[..pos]` are placed.
    ///
    /// Every unplaced task lands no earlier than its earliest feasible
    /// station, so stations `s..m` must absorb their current load plus all
    /// unplaced work that cannot go before `s`.
    fn bound(&self, pos: usize) -> f64 {
        let m = self.loads.len();
        let order = self.inst.topo_order();
        let mut earliest = vec![0usize; self.inst.len()];
        let mut pending_from = vec![0.0; m];
        for &t in &order[pos..] {
            let e = self
                .inst
                .preds(t)
                .iter()
                .map(|&p| {
                    if self.station_of[p] != usize::MAX {
                        self.station_of[p]
                    } else {
                        earliest[p]
                    }
                })
                .max()
                .unwrap_or(0);
            earliest[t] = e;
            pending_from[e] += self.inst.duration(t);
        }
        let mut bound = self.loads.iter().copied().fold(0.0, f64::max);
        let mut tail = 0.0;
        for s in (0..m).rev() {
            tail += self.loads[s] + pending_from[s];
            let share = tail / (m - s) as f64;
            let share = if self.integral { share.ceil() } else { share };
            bound = bound.max(share);
        }
        bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linebalance::BalanceTask;

    fn none() -> Vec<String> {
        Vec::new()
    }

    /// Exhaustive m^n enumeration with stations sorted topologically.
    fn brute_force_ct(inst: &BalanceInstance) -> f64 {
        let n = inst.len();
        let m = inst.stations();
        let mut best = f64::INFINITY;
        let mut st = vec![0usize; n];
        loop {
            let legal = (0..n).all(|j| inst.preds(j).iter().all(|&p| st[p] <= st[j]));
            if legal {
                let mut loads = vec![0.0; m];
                for j in 0..n {
                    loads[st[j]] += inst.duration(j);
                }
                best = best.min(loads.iter().copied().fold(0.0, f64::max));
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                st[k] += 1;
                if st[k] < m {
                    break;
                }
                st[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn single_task_uses_one_station() {
        let inst = BalanceInstance::new(vec![BalanceTask::new("a", 7.0, none())], 3, None).unwrap();
        let r = solve_oracle(&inst).unwrap();
        assert_eq!(r.report.ct, 7.0);
        assert_eq!(r.report.nwu, 1);
    }

    #[test]
    fn two_independent_tasks_split() {
        let tasks = vec![BalanceTask::new("a", 10.0, none()), BalanceTask::new("b", 10.0, none())];
        let inst = BalanceInstance::new(tasks, 2, None).unwrap();
        assert_eq!(solve_oracle(&inst).unwrap().report.ct, 10.0);
    }

    #[test]
    fn rejects_oversized_instances() {
        let tasks: Vec<_> = (0..21)
            .map(|i| BalanceTask::new(format!("t{i}"), 1.0, none()))
            .collect();
        let inst = BalanceInstance::new(tasks, 3, None).unwrap();
        assert_eq!(
            solve_oracle(&inst),
            Err(BalanceError::TooLarge { tasks: 21, bound: 20 })
        );
    }

    #[test]
    fn matches_brute_force_on_small_dags() {
        let shapes: Vec<Vec<(f64, Vec<&str>)>> = vec![
            vec![
                (3.0, vec![]),
                (5.0, vec!["t0"]),
                (2.0, vec!["t0"]),
                (4.0, vec!["t1", "t2"]),
                (6.0, vec![]),
            ],
            vec![
                (1.5, vec![]),
                (2.5, vec![]),
                (3.5, vec!["t0", "t1"]),
                (1.0, vec![]),
                (2.0, vec!["t3"]),
                (4.0, vec!["t2"]),
            ],
            vec![
                (9.0, vec![]),
                (1.0, vec![]),
                (1.0, vec![]),
                (1.0, vec![]),
                (1.0, vec![]),
                (1.0, vec![]),
                (1.0, vec![]),
            ],
        ];
        for shape in shapes {
            let tasks: Vec<_> = shape
                .iter()
                .enumerate()
                .map(|(i, (d, p))| BalanceTask::new(format!("t{i}"), *d, p.iter().copied()))
                .collect();
            for m in 1..=4 {
                let inst = BalanceInstance::new(tasks.clone(), m, None).unwrap();
                let r = solve_oracle(&inst).unwrap();
                assert_eq!(r.report.ct, brute_force_ct(&inst), "m={m}");
                assert!(r.report.precedence_pairs().is_empty());
            }
        }
    }

    #[test]
    fn more_stations_than_tasks() {
        let tasks = vec![BalanceTask::new("a", 4.0, none()), BalanceTask::new("b", 6.0, ["a"])];
        let inst = BalanceInstance::new(tasks, 5, None).unwrap();
        let r = solve_oracle(&inst).unwrap();
        assert_eq!(r.report.ct, 6.0);
        assert_eq!(r.report.nwu, 2);
    }
}
