use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance::{Assignment, BalanceInstance};
use super::report::{evaluate, BalanceReport};
use super::BalanceError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    /// Starting temperature; `None` uses the mean task duration.
    pub t0: Option<f64>,
    pub alpha: f64,
    pub moves_per_temperature: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            t0: None,
            alpha: 0.95,
            moves_per_temperature: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub assignment: Assignment,
    pub report: BalanceReport,
    /// Evaluations until the first limit-feasible state, counting the start
    /// as 1. `None` if no feasible state was visited.
    pub iterations_to_feasible: Option<usize>,
    /// Accepted moves that strictly lowered the current CT.
    pub improving_moves: usize,
    pub evaluations: usize,
}

/// Ranked-positional-weight greedy: fills stations in turn with the
/// available task of highest positional weight (own duration plus all
/// transitive successors) that still fits. The last station takes whatever
/// remains. Returns a 0-based station per task.
pub fn rpw_greedy(inst: &BalanceInstance) -> Vec<usize> {
    let n = inst.len();
    let m = inst.stations();
    let weight = positional_weights(inst);
    let fits = |load: f64, d: f64| match inst.ct_limit() {
        Some(_) => inst.within_limit(load + d),
        None => load + d <= inst.lower_bound_ct(),
    };
    let mut station_of = vec![usize::MAX; n];
    let mut remaining_preds: Vec<usize> = (0..n).map(|i| inst.preds(i).len()).collect();
    let mut placed = 0;
    for s in 0..m {
        let mut load = 0.0;
        loop {
            let last = s + 1 == m;
            let pick = (0..n)
                .filter(|&i| station_of[i] == usize::MAX && remaining_preds[i] == 0)
                .filter(|&i| last || load == 0.0 || fits(load, inst.duration(i)))
                .max_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(b.cmp(&a)));
            let Some(i) = pick else { break };
            station_of[i] = s;
            load += inst.duration(i);
            placed += 1;
            for &j in inst.succs(i) {
                remaining_preds[j] -= 1;
            }
        }
        if placed == n {
            break;
        }
    }
    for st in station_of.iter_mut() {
        if *st == usize::MAX {
            *st = m - 1;
        }
    }
    station_of
}

fn positional_weights(inst: &BalanceInstance) -> Vec<f64> {
    let n = inst.len();
    let mut weight = vec![0.0; n];
    for &i in inst.topo_order().iter().rev() {
        let mut seen = vec![false; n];
        let mut stack = inst.succs(i).to_vec();
        let mut w = inst.duration(i);
        while let Some(j) = stack.pop() {
            if !seen[j] {
                seen[j] = true;
                w += inst.duration(j);
                stack.extend_from_slice(inst.succs(j));
            }
        }
        weight[i] = w;
    }
    weight
}

/// Seeded simulated annealing from the ranked-positional-weight start.
pub fn solve_baseline(inst: &BalanceInstance, seed: u64, budget: usize) -> Result<BaselineResult, BalanceError> {
    solve_baseline_from(inst, &rpw_greedy(inst), seed, budget, AnnealConfig::default())
}

/// Annealing over precedence-legal single-task moves and pairwise swaps.
///
/// Energy is the cycle time plus a small load-spread term so that plateaus
/// still have a gradient. `budget` counts proposed moves.
pub fn solve_baseline_from(
    inst: &BalanceInstance,
    start: &[usize],
    seed: u64,
    budget: usize,
    config: AnnealConfig,
) -> Result<BaselineResult, BalanceError> {
    if budget == 0 {
        return Err(BalanceError::ZeroBudget);
    }
    let n = inst.len();
    let m = inst.stations();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start.to_vec();
    let mut loads = loads_of(inst, &state);
    let mut energy = energy_of(&loads);
    let mut best = state.clone();
    let mut best_key = rank_key(inst, &loads);
    let mut temperature = config.t0.unwrap_or_else(|| inst.total_work() / n as f64);
    let mut evaluations = 1;
    let mut first_feasible = limit_feasible(inst, &loads).then_some(1);
    let mut improving = 0;

    for step in 1..=budget {
        if let Some((changes, new_loads)) = propose(inst, &state, &loads, &mut rng) {
            evaluations += 1;
            let new_energy = energy_of(&new_loads);
            let delta = new_energy - energy;
            let accept = delta <= 0.0 || (temperature > 0.0 && rng.gen::<f64>() < (-delta / temperature).exp());
            if accept {
                if max_load(&new_loads) < max_load(&loads) {
                    improving += 1;
                }
                for (task, st) in changes {
                    state[task] = st;
                }
                loads = new_loads;
                energy = new_energy;
                if first_feasible.is_none() && limit_feasible(inst, &loads) {
                    first_feasible = Some(evaluations);
                }
                let key = rank_key(inst, &loads);
                if key < best_key {
                    best_key = key;
                    best = state.clone();
                }
            }
        }
        if step % config.moves_per_temperature == 0 {
            temperature *= config.alpha;
        }
    }
    debug_assert_eq!(best.len(), n);
    debug_assert!(best.iter().all(|&s| s < m));
    let assignment = inst.assignment_from_stations(&best);
    let mut report = evaluate(inst, &assignment)?;
    report.nitc = first_feasible;
    tracing::debug!(seed, ct = report.ct, evaluations, "annealing finished");
    Ok(BaselineResult {
        assignment,
        report,
        iterations_to_feasible: first_feasible,
        improving_moves: improving,
        evaluations,
    })
}

type Move = (Vec<(usize, usize)>, Vec<f64>);

fn propose(inst: &BalanceInstance, state: &[usize], loads: &[f64], rng: &mut ChaCha8Rng) -> Option<Move> {
    let n = inst.len();
    let m = inst.stations();
    if m < 2 {
        return None;
    }
    let mut new_loads = loads.to_vec();
    if rng.gen_bool(0.5) {
        let task = rng.gen_range(0..n);
        let (lo, hi) = range(inst, state, task);
        if lo == hi {
            return None;
        }
        let mut to = rng.gen_range(lo..hi);
        if to >= state[task] {
            to += 1;
        }
        let d = inst.duration(task);
        new_loads[state[task]] -= d;
        new_loads[to] += d;
        Some((vec![(task, to)], new_loads))
    } else {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (sa, sb) = (state[a], state[b]);
        if sa == sb {
            return None;
        }
        let mut trial = state.to_vec();
        trial[a] = sb;
        trial[b] = sa;
        let legal = [a, b].iter().all(|&t| {
            inst.preds(t).iter().all(|&p| trial[p] <= trial[t]) && inst.succs(t).iter().all(|&q| trial[q] >= trial[t])
        });
        if !legal {
            return None;
        }
        let (da, db) = (inst.duration(a), inst.duration(b));
        new_loads[sa] += db - da;
        new_loads[sb] += da - db;
        Some((vec![(a, sb), (b, sa)], new_loads))
    }
}

/// Inclusive 0-based station range where `task` may sit given the others.
fn range(inst: &BalanceInstance, state: &[usize], task: usize) -> (usize, usize) {
    let lo = inst.preds(task).iter().map(|&p| state[p]).max().unwrap_or(0);
    let hi = inst
        .succs(task)
        .iter()
        .map(|&q| state[q])
        .min()
        .unwrap_or(inst.stations() - 1);
    (lo, hi)
}

fn loads_of(inst: &BalanceInstance, state: &[usize]) -> Vec<f64> {
    let mut loads = vec![0.0; inst.stations()];
    for (i, &s) in state.iter().enumerate() {
        loads[s] += inst.duration(i);
    }
    loads
}

fn max_load(loads: &[f64]) -> f64 {
    loads.iter().copied().fold(0.0, f64::max)
}

fn energy_of(loads: &[f64]) -> f64 {
    let mean = loads.iter().sum::<f64>() / loads.len() as f64;
    let var = loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / loads.len() as f64;
    max_load(loads) + 0.05 * var.sqrt()
}

fn limit_feasible(inst: &BalanceInstance, loads: &[f64]) -> bool {
    loads.iter().all(|&l| inst.within_limit(l))
}

/// Best-so-far ordering: limit-feasible states first, then lower CT.
fn rank_key(inst: &BalanceInstance, loads: &[f64]) -> (bool, OrderedF64) {
    (!limit_feasible(inst, loads), OrderedF64(max_load(loads)))
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrderedF64(f64);
