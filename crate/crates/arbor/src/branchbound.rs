//! Best-bound branch and bound for mixed-binary linear models, with
//! lazy constraints injected at integral nodes.
//!
//! The engine dives depth-first until it finds a first incumbent, then
//! switches to best-bound node selection. Branching picks the most
//! fractional binary variable with lowest-index tie-break. A lazy
//! separator, when present, is invoked on every LP-integral assignment;
//! any constraints it returns are pooled, enforced at all later node
//! solves, and the current node is re-solved before the assignment can
//! become the incumbent.
//!
//! With `threads > 1`, open-node LPs are pre-solved speculatively in
//! parallel. Node processing itself stays sequential in the exact
//! order of the single-threaded engine and stale speculative results
//! (older cut-pool version) are discarded, so both modes take identical
//! decisions and return identical results.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::linopt::{solve_lp, Constraint, LinearModel, LinoptError, LpStatus};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("linear solver: {0}")]
    Linopt(#[from] LinoptError),
    #[error("model is unbounded")]
    Unbounded,
    #[error("integer variable {0} must be binary with bounds [0,1]")]
    NonBinaryInteger(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MioStatus {
    Optimal,
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub nodes_explored: u64,
    pub lp_solves: u64,
    pub cuts_added: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MioResult {
    pub status: MioStatus,
    /// Best feasible assignment found, integral variables rounded.
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent.
    pub objective: Option<f64>,
    /// Global upper bound at termination.
    pub bound: f64,
    /// (bound - incumbent) / max(1, |bound|).
    pub gap: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub time_limit: Option<Duration>,
    /// A variable is integral when within this distance of an integer.
    pub int_tol: f64,
    /// Terminate once the relative gap falls below this.
    pub gap_tol: f64,
    /// Number of speculative LP workers; 1 means fully serial.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: None,
            int_tol: 1e-6,
            gap_tol: 1e-6,
            threads: 1,
        }
    }
}

/// Callback invoked on LP-integral assignments. Returns the violated
/// constraints to pool, or an empty vector to accept the assignment.
pub trait LazySeparator: Send {
    fn separate(&mut self, assignment: &[f64]) -> Vec<Constraint>;
}

/// A no-op separator that accepts every integral assignment.
pub struct NoSeparation;

impl LazySeparator for NoSeparation {
    fn separate(&mut self, _assignment: &[f64]) -> Vec<Constraint> {
        Vec::new()
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    /// (variable, value) bound fixings accumulated along the path.
    fixings: Vec<(usize, u8)>,
    /// Inherited bound from the parent LP; always an upper bound.
    bound: f64,
    depth: u32,
}

/// Mutable solver state: incumbent, bound, open nodes and the lazy-cut
/// pool. The pool is append-only; a node LP solved at pool version v
/// enforces exactly the first v pooled cuts.
pub struct SolveState {
    pub incumbent: Option<(Vec<f64>, f64)>,
    pub best_bound: f64,
    open: Vec<Node>,
    pub cut_pool: Vec<Constraint>,
    pub stats: SolveStats,
    next_id: u64,
}

impl SolveState {
    pub fn gap(&self) -> f64 {
        match &self.incumbent {
            None => f64::INFINITY,
            Some((_, objective)) => {
                (self.best_bound - objective) / f64::max(1.0, self.best_bound.abs())
            }
        }
    }

    fn incumbent_objective(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::NEG_INFINITY, |(_, objective)| *objective)
    }

    /// Largest bound among open nodes, for reporting and fathoming.
    fn open_bound(&self) -> f64 {
        self.open
            .iter()
            .map(|n| n.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Node selection: dive on the deepest node until an incumbent
    /// exists, then best bound. Ties break on node id so both modes
    /// are reproducible.
    fn select(&mut self) -> Option<Node> {
        if self.open.is_empty() {
            return None;
        }
        let position = if self.incumbent.is_none() {
            self.open
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.depth.cmp(&b.depth).then(b.id.cmp(&a.id)))
                .map(|(i, _)| i)
                .unwrap()
        } else {
            self.open
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    a.bound.partial_cmp(&b.bound).unwrap().then(b.id.cmp(&a.id))
                })
                .map(|(i, _)| i)
                .unwrap()
        };
        Some(self.open.swap_remove(position))
    }
}

fn node_model(base: &LinearModel, pool: &[Constraint], node: &Node) -> LinearModel {
    let mut model = base.clone();
    model.constraints.extend(pool.iter().cloned());
    for &(variable, value) in &node.fixings {
        model.variables[variable].lower = f64::from(value);
        model.variables[variable].upper = f64::from(value);
    }
    model
}

fn most_fractional(values: &[f64], integral: &[usize], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &v in integral {
        let frac = values[v] - values[v].floor();
        let distance = frac.min(1.0 - frac);
        if distance > int_tol && best.map_or(true, |(_, d)| distance > d) {
            best = Some((v, distance));
        }
    }
    best.map(|(v, _)| v)
}

fn rounded(values: &[f64], integral: &[usize]) -> Vec<f64> {
    let mut out = values.to_vec();
    for &v in integral {
        out[v] = out[v].round();
    }
    out
}

/// Solve a mixed-binary maximization problem.
///
/// Integer variables must be binary. The returned incumbent is optimal
/// within the gap tolerance unless the time limit struck first.
pub fn solve_mio(
    model: &LinearModel,
    mut separator: Option<&mut dyn LazySeparator>,
    config: &SolverConfig,
) -> Result<MioResult, SolveError> {
    model.validate()?;
    let integral = model.integral_variables();
    for &v in &integral {
        let var = &model.variables[v];
        if var.lower < -config.int_tol || var.upper > 1.0 + config.int_tol {
            return Err(SolveError::NonBinaryInteger(v));
        }
    }

    let start = Instant::now();
    let mut state = SolveState {
        incumbent: None,
        best_bound: f64::INFINITY,
        open: vec![Node {
            id: 0,
            fixings: Vec::new(),
            bound: f64::INFINITY,
            depth: 0,
        }],
        cut_pool: Vec::new(),
        stats: SolveStats::default(),
        next_id: 1,
    };
    let mut root_infeasible = false;
    let mut hit_time_limit = false;
    // speculative LP results: node id -> (pool version, status, objective, values)
    let mut stash: std::collections::HashMap<u64, (usize, LpStatus, f64, Vec<f64>)> =
        std::collections::HashMap::new();

    'outer: while let Some(node) = state.select() {
        if let Some(limit) = config.time_limit {
            if start.elapsed() >= limit {
                state.open.push(node);
                hit_time_limit = true;
                break;
            }
        }
        // fathom on the inherited bound before paying for an LP
        let fathom_cut = state.incumbent_objective();
        if node.bound.is_finite()
            && node.bound - fathom_cut <= config.gap_tol * f64::max(1.0, node.bound.abs())
        {
            continue;
        }

        if config.threads > 1 && stash.is_empty() && !state.open.is_empty() {
            speculate(model, &state, &node, config, &mut stash);
        }

        state.stats.nodes_explored += 1;
        let mut node = node;
        // re-solve loop: lazy cuts may be added while this node stays active
        loop {
            let pool_version = state.cut_pool.len();
            let reuse = stash.remove(&node.id).filter(|(v, ..)| *v == pool_version);
            let (status, objective, values) = match reuse {
                Some((_, status, objective, values)) => {
                    state.stats.lp_solves += 1;
                    (status, objective, values)
                }
                None => {
                    let lp = solve_lp(&node_model(model, &state.cut_pool, &node), true)?;
                    state.stats.lp_solves += 1;
                    (lp.status, lp.objective, lp.values)
                }
            };
            match status {
                LpStatus::Infeasible => {
                    if node.id == 0 {
                        root_infeasible = true;
                    }
                    break;
                }
                LpStatus::Unbounded => return Err(SolveError::Unbounded),
                LpStatus::Optimal => {}
            }
            node.bound = objective;
            let fathom_cut = state.incumbent_objective();
            if objective - fathom_cut <= config.gap_tol * f64::max(1.0, objective.abs()) {
                break;
            }

            match most_fractional(&values, &integral, config.int_tol) {
                Some(branch_var) => {
                    let mut left = node.fixings.clone();
                    left.push((branch_var, 0));
                    let mut right = node.fixings.clone();
                    right.push((branch_var, 1));
                    let fractional = values[branch_var];
                    // dive toward the side the relaxation leans to
                    let (first, second) = if fractional >= 0.5 {
                        (right, left)
                    } else {
                        (left, right)
                    };
                    for fixings in [second, first] {
                        state.open.push(Node {
                            id: state.next_id,
                            fixings,
                            bound: objective,
                            depth: node.depth + 1,
                        });
                        state.next_id += 1;
                    }
                    break;
                }
                None => {
                    let candidate = rounded(&values, &integral);
                    let cuts = match separator.as_mut() {
                        Some(s) => s.separate(&candidate),
                        None => Vec::new(),
                    };
                    if cuts.is_empty() {
                        let objective = model.objective_at(&candidate);
                        if objective > state.incumbent_objective() {
                            let bound = state.open_bound().max(node.bound);
                            log::info!(
                                target: "arbor::solver",
                                "node={} bound={:.6} incumbent={:.6} gap={:.6} cuts={}",
                                state.stats.nodes_explored,
                                bound,
                                objective,
                                (bound - objective) / f64::max(1.0, bound.abs()),
                                state.cut_pool.len()
                            );
                            state.incumbent = Some((candidate, objective));
                        }
                        break;
                    }
                    state.stats.cuts_added += cuts.len() as u64;
                    state.cut_pool.extend(cuts);
                    // stale speculative results would miss the new cuts
                    stash.clear();
                    if let Some(limit) = config.time_limit {
                        if start.elapsed() >= limit {
                            state.open.push(node);
                            hit_time_limit = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if state.stats.nodes_explored % 256 == 0 {
            let bound = state.open_bound();
            log::debug!(
                target: "arbor::solver",
                "node={} bound={:.6} incumbent={:.6} gap={:.6} cuts={}",
                state.stats.nodes_explored,
                bound,
                state.incumbent_objective(),
                state.gap(),
                state.cut_pool.len()
            );
        }
    }

    state.stats.wall_seconds = start.elapsed().as_secs_f64();
    let (status, bound) = if hit_time_limit {
        let bound = state.open_bound().max(state.incumbent_objective());
        (MioStatus::TimeLimit, bound)
    } else if state.incumbent.is_none() {
        debug_assert!(root_infeasible || state.open.is_empty());
        (MioStatus::Infeasible, f64::NEG_INFINITY)
    } else {
        // queue exhausted: the incumbent is proven optimal
        (MioStatus::Optimal, state.incumbent_objective())
    };
    state.best_bound = bound;
    let gap = match status {
        MioStatus::Optimal => 0.0,
        _ => state.gap(),
    };
    let (incumbent, objective) = match state.incumbent {
        Some((values, objective)) => (Some(values), Some(objective)),
        None => (None, None),
    };
    Ok(MioResult {
        status,
        incumbent,
        objective,
        bound,
        gap,
        stats: state.stats,
    })
}

/// Pre-solve the LPs of the nodes the owner is about to process. Only
/// results matching the current cut-pool version are ever reused.
fn speculate(
    base: &LinearModel,
    state: &SolveState,
    current: &Node,
    config: &SolverConfig,
    stash: &mut std::collections::HashMap<u64, (usize, LpStatus, f64, Vec<f64>)>,
) {
    let pool_version = state.cut_pool.len();
    let mut candidates: Vec<&Node> = state.open.iter().collect();
    candidates.sort_by(|a, b| b.bound.partial_cmp(&a.bound).unwrap().then(a.id.cmp(&b.id)));
    let batch: Vec<&Node> = std::iter::once(current)
        .chain(candidates)
        .take(config.threads)
        .collect();
    let results: Vec<(u64, (usize, LpStatus, f64, Vec<f64>))> = batch
        .into_par_iter()
        .filter_map(|node| {
            solve_lp(&node_model(base, &state.cut_pool, node), true)
                .ok()
                .map(|lp| (node.id, (pool_version, lp.status, lp.objective, lp.values)))
        })
        .collect();
    stash.extend(results);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linopt::Relation;

    #[test]
    fn pure_lp_equals_simplex() {
        let mut model = LinearModel::new();
        let x = model.add_variable("x", 0.0, 10.0, false, 1.0);
        model.add_constraint(Constraint::new(vec![(x, 1.0)], Relation::Le, 1.5));
        let lp = solve_lp(&model, true).unwrap();
        let mio = solve_mio(&model, None, &SolverConfig::default()).unwrap();
        assert_eq!(mio.status, MioStatus::Optimal);
        assert!((mio.objective.unwrap() - lp.objective).abs() < 1e-9);
    }

    #[test]
    fn binary_knapsack_rounds_down() {
        let mut model = LinearModel::new();
        let x = model.add_binary("x", 1.0);
        let y = model.add_binary("y", 1.0);
        model.add_constraint(Constraint::new(vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.5));
        let mio = solve_mio(&model, None, &SolverConfig::default()).unwrap();
        assert_eq!(mio.status, MioStatus::Optimal);
        assert!((mio.objective.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(mio.gap, 0.0);
    }

    #[test]
    fn infeasible_root_is_reported() {
        let mut model = LinearModel::new();
        let x = model.add_binary("x", 1.0);
        model.add_constraint(Constraint::new(vec![(x, 1.0)], Relation::Ge, 2.0));
        let mio = solve_mio(&model, None, &SolverConfig::default()).unwrap();
        assert_eq!(mio.status, MioStatus::Infeasible);
        assert!(mio.incumbent.is_none());
    }

    #[test]
    fn non_binary_integer_rejected() {
        let mut model = LinearModel::new();
        model.add_variable("x", 0.0, 5.0, true, 1.0);
        assert!(matches!(
            solve_mio(&model, None, &SolverConfig::default()),
            Err(SolveError::NonBinaryInteger(0))
        ));
    }

    struct CapSeparator {
        cap: f64,
        calls: usize,
    }

    impl LazySeparator for CapSeparator {
        fn separate(&mut self, assignment: &[f64]) -> Vec<Constraint> {
            self.calls += 1;
            let total: f64 = assignment.iter().sum();
            if total > self.cap + 1e-9 {
                // lazily reveal sum(x) <= cap
                let terms = (0..assignment.len()).map(|v| (v, 1.0)).collect();
                vec![Constraint::new(terms, Relation::Le, self.cap)]
            } else {
                Vec::new()
            }
        }
    }

    #[test]
    fn lazy_cuts_are_enforced_before_acceptance() {
        let mut model = LinearModel::new();
        for i in 0..4 {
            model.add_binary(format!("x{i}"), 1.0);
        }
        let mut separator = CapSeparator { cap: 2.0, calls: 0 };
        let mio = solve_mio(&model, Some(&mut separator), &SolverConfig::default()).unwrap();
        assert_eq!(mio.status, MioStatus::Optimal);
        assert!((mio.objective.unwrap() - 2.0).abs() < 1e-9);
        assert!(separator.calls >= 2);
        let incumbent = mio.incumbent.unwrap();
        assert!(incumbent.iter().sum::<f64>() <= 2.0 + 1e-9);
        assert_eq!(mio.stats.cuts_added, 1);
    }

    #[test]
    fn incumbent_satisfies_every_pooled_cut() {
        let mut model = LinearModel::new();
        for i in 0..6 {
            model.add_binary(format!("x{i}"), if i % 2 == 0 { 2.0 } else { 1.0 });
        }
        let mut separator = CapSeparator { cap: 3.0, calls: 0 };
        let mio = solve_mio(&model, Some(&mut separator), &SolverConfig::default()).unwrap();
        let incumbent = mio.incumbent.unwrap();
        let total: f64 = incumbent.iter().sum();
        assert!(total <= 3.0 + 1e-9);
        // best take under the hidden cap: all three weight-2 items
        assert!((mio.objective.unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn time_limit_returns_best_effort() {
        let mut model = LinearModel::new();
        for i in 0..12 {
            model.add_binary(format!("x{i}"), 1.0 + (i as f64) * 0.01);
        }
        let terms: Vec<(usize, f64)> = (0..12).map(|v| (v, 1.0)).collect();
        model.add_constraint(Constraint::new(terms, Relation::Le, 5.5));
        let config = SolverConfig {
            time_limit: Some(Duration::from_secs(0)),
            ..SolverConfig::default()
        };
        let mio = solve_mio(&model, None, &config).unwrap();
        assert_eq!(mio.status, MioStatus::TimeLimit);
    }

    #[test]
    fn parallel_mode_matches_serial() {
        let mut model = LinearModel::new();
        for i in 0..10 {
            model.add_binary(format!("x{i}"), 1.0 + f64::from(i % 3));
        }
        let terms: Vec<(usize, f64)> =
            (0..10).map(|v| (v, 1.0 + f64::from((v % 4) as u8))).collect();
        model.add_constraint(Constraint::new(terms, Relation::Le, 9.5));
        let serial = solve_mio(&model, None, &SolverConfig::default()).unwrap();
        let parallel = solve_mio(
            &model,
            None,
            &SolverConfig {
                threads: 4,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(serial.status, parallel.status);
        assert_eq!(serial.objective, parallel.objective);
        assert_eq!(serial.incumbent, parallel.incumbent);
        assert_eq!(serial.stats.nodes_explored, parallel.stats.nodes_explored);
    }

    #[test]
    fn node_count_stays_finite_on_tight_instances() {
        // contradictory objective pulls both ways; must still terminate
        let mut model = LinearModel::new();
        for i in 0..8 {
            model.add_binary(format!("x{i}"), if i < 4 { 1.0 } else { -1.0 });
        }
        let terms: Vec<(usize, f64)> = (0..8).map(|v| (v, 1.0)).collect();
        model.add_constraint(Constraint::new(terms, Relation::Eq, 4.0));
        let mio = solve_mio(&model, None, &SolverConfig::default()).unwrap();
        assert_eq!(mio.status, MioStatus::Optimal);
        assert!(mio.stats.nodes_explored <= 1 << 8);
        assert!((mio.objective.unwrap() - 4.0).abs() < 1e-9);
    }
}
