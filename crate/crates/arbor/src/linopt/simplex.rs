//! Bounded-variable primal simplex on a dense tableau.
//!
//! Two phases with one artificial column per row; slacks turn every
//! constraint into an equality. Dantzig pricing with Bland's rule
//! engaged after a stall threshold. Dense storage keeps the pivot loop
//! simple and predictable at the model sizes produced by the tree
//! formulations.

use super::{FEAS_EPS, LinearModel, LinoptError, LpSolution, LpStatus, Relation};
#[cfg(test)]
use super::Constraint;

const PIVOT_EPS: f64 = 1e-9;
const DEGEN_EPS: f64 = 1e-10;
const STALL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonbasicAt {
    Lower,
    Upper,
    Free,
}

struct Tableau {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    nonbasic_at: Vec<NonbasicAt>,
    beta: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
    bland: bool,
    degenerate_streak: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Progress,
}

impl Tableau {
    fn nonbasic_value(&self, col: usize) -> f64 {
        match self.nonbasic_at[col] {
            NonbasicAt::Lower => self.lower[col],
            NonbasicAt::Upper => self.upper[col],
            NonbasicAt::Free => 0.0,
        }
    }

    fn value(&self, col: usize) -> f64 {
        match self.basic_row[col] {
            Some(row) => self.beta[row],
            None => self.nonbasic_value(col),
        }
    }

    /// Recompute reduced costs for a fresh cost vector (phase switch).
    fn price(&mut self, costs: &[f64]) {
        let mut multipliers = vec![0.0; self.n_rows];
        for row in 0..self.n_rows {
            multipliers[row] = costs[self.basis[row]];
        }
        for col in 0..self.n_cols {
            let mut d = costs[col];
            if self.basic_row[col].is_some() {
                self.reduced[col] = 0.0;
                continue;
            }
            for row in 0..self.n_rows {
                let coef = self.rows[row][col];
                if coef != 0.0 {
                    d -= multipliers[row] * coef;
                }
            }
            self.reduced[col] = d;
        }
    }

    /// Pick the entering column, or None when no reduced cost improves
    /// the (minimization) objective.
    fn entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for col in 0..self.n_cols {
            if self.basic_row[col].is_some() || self.lower[col] == self.upper[col] {
                continue;
            }
            let d = self.reduced[col];
            let direction = match self.nonbasic_at[col] {
                NonbasicAt::Lower if d < -FEAS_EPS => 1.0,
                NonbasicAt::Upper if d > FEAS_EPS => -1.0,
                NonbasicAt::Free if d < -FEAS_EPS => 1.0,
                NonbasicAt::Free if d > FEAS_EPS => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((col, direction));
            }
            if best.map_or(true, |(_, _, score)| d.abs() > score) {
                best = Some((col, direction, d.abs()));
            }
        }
        best.map(|(col, direction, _)| (col, direction))
    }

    fn step(&mut self) -> StepOutcome {
        let Some((entering, direction)) = self.entering() else {
            return StepOutcome::Optimal;
        };

        // ratio test: how far can the entering variable move before a
        // basic variable hits a bound or it reaches its own other bound
        let mut limit = self.upper[entering] - self.lower[entering]; // may be inf
        let mut leaving_row: Option<usize> = None;
        for row in 0..self.n_rows {
            let g = direction * self.rows[row][entering];
            let basic = self.basis[row];
            let row_limit = if g > PIVOT_EPS {
                if self.lower[basic].is_finite() {
                    ((self.beta[row] - self.lower[basic]) / g).max(0.0)
                } else {
                    continue;
                }
            } else if g < -PIVOT_EPS {
                if self.upper[basic].is_finite() {
                    ((self.upper[basic] - self.beta[row]) / -g).max(0.0)
                } else {
                    continue;
                }
            } else {
                continue;
            };
            let take = if row_limit < limit - DEGEN_EPS {
                true
            } else if row_limit > limit + DEGEN_EPS {
                false
            } else {
                // tie: keep a basis change over a bound flip, then
                // break ties for determinism and stability
                match leaving_row {
                    None => true,
                    Some(current) => {
                        if self.bland {
                            self.basis[row] < self.basis[current]
                        } else {
                            let g_cur = (direction * self.rows[current][entering]).abs();
                            g.abs() > g_cur
                        }
                    }
                }
            };
            if take {
                limit = row_limit.min(limit);
                leaving_row = Some(row);
            }
        }

        if limit.is_infinite() {
            return StepOutcome::Unbounded;
        }

        self.iterations += 1;
        if limit <= DEGEN_EPS {
            self.degenerate_streak += 1;
            if self.degenerate_streak > STALL_THRESHOLD {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }

        match leaving_row {
            None => {
                // bound flip: the entering variable runs to its other bound
                for row in 0..self.n_rows {
                    let g = direction * self.rows[row][entering];
                    if g != 0.0 {
                        self.beta[row] -= g * limit;
                    }
                }
                self.nonbasic_at[entering] = match self.nonbasic_at[entering] {
                    NonbasicAt::Lower => NonbasicAt::Upper,
                    NonbasicAt::Upper => NonbasicAt::Lower,
                    NonbasicAt::Free => unreachable!("free variables have no bound to flip to"),
                };
            }
            Some(r) => {
                let entering_value = self.nonbasic_value(entering) + direction * limit;
                let leaving = self.basis[r];
                let g_r = direction * self.rows[r][entering];
                for row in 0..self.n_rows {
                    if row != r {
                        let g = direction * self.rows[row][entering];
                        if g != 0.0 {
                            self.beta[row] -= g * limit;
                        }
                    }
                }
                self.nonbasic_at[leaving] = if g_r > 0.0 {
                    NonbasicAt::Lower
                } else {
                    NonbasicAt::Upper
                };
                self.basic_row[leaving] = None;
                self.basis[r] = entering;
                self.basic_row[entering] = Some(r);
                self.beta[r] = entering_value;

                // row reduction around the pivot element
                let pivot = self.rows[r][entering];
                let pivot_row: Vec<f64> = self.rows[r].iter().map(|v| v / pivot).collect();
                self.rows[r] = pivot_row;
                for row in 0..self.n_rows {
                    if row == r {
                        continue;
                    }
                    let factor = self.rows[row][entering];
                    if factor != 0.0 {
                        for col in 0..self.n_cols {
                            self.rows[row][col] -= factor * self.rows[r][col];
                        }
                        self.rows[row][entering] = 0.0;
                    }
                }
                let factor = self.reduced[entering];
                if factor != 0.0 {
                    for col in 0..self.n_cols {
                        self.reduced[col] -= factor * self.rows[r][col];
                    }
                    self.reduced[entering] = 0.0;
                }
            }
        }
        StepOutcome::Progress
    }
}

/// Solve the LP relaxation of a model to optimality, or report an
/// infeasible or unbounded status.
///
/// With `ignore_integrality` unset the model must be purely continuous;
/// integrality is never enforced here, it is the branch-and-bound
/// engine's job.
pub fn solve_lp(model: &LinearModel, ignore_integrality: bool) -> Result<LpSolution, LinoptError> {
    model.validate()?;
    if !ignore_integrality && model.variables.iter().any(|v| v.integral) {
        return Err(LinoptError::IntegralModel);
    }

    let n = model.n_variables();
    let m = model.constraints.len();
    let n_cols = n + 2 * m;

    let mut lower = Vec::with_capacity(n_cols);
    let mut upper = Vec::with_capacity(n_cols);
    for v in &model.variables {
        lower.push(v.lower);
        upper.push(v.upper);
    }
    for c in &model.constraints {
        let (lo, hi) = match c.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lower.push(lo);
        upper.push(hi);
    }
    // artificial bounds are appended after residual signs are known
    lower.extend(std::iter::repeat(0.0).take(m));
    upper.extend(std::iter::repeat(f64::INFINITY).take(m));

    let mut nonbasic_at = Vec::with_capacity(n_cols);
    for col in 0..n + m {
        nonbasic_at.push(if lower[col].is_finite() {
            NonbasicAt::Lower
        } else if upper[col].is_finite() {
            NonbasicAt::Upper
        } else {
            NonbasicAt::Free
        });
    }
    // slacks start at zero, which every relation admits
    for col in n..n + m {
        nonbasic_at[col] = match model.constraints[col - n].relation {
            Relation::Le | Relation::Eq => NonbasicAt::Lower,
            Relation::Ge => NonbasicAt::Upper,
        };
    }
    nonbasic_at.extend(std::iter::repeat(NonbasicAt::Lower).take(m));

    let start_values: Vec<f64> = (0..n)
        .map(|col| match nonbasic_at[col] {
            NonbasicAt::Lower => lower[col],
            NonbasicAt::Upper => upper[col],
            NonbasicAt::Free => 0.0,
        })
        .collect();

    let mut rows = vec![vec![0.0; n_cols]; m];
    let mut beta = vec![0.0; m];
    let mut basis = Vec::with_capacity(m);
    let mut basic_row = vec![None; n_cols];
    let mut b_scale = 1.0f64;
    for (i, c) in model.constraints.iter().enumerate() {
        let mut residual = c.rhs;
        b_scale = b_scale.max(c.rhs.abs());
        for &(v, coef) in &c.terms {
            rows[i][v] += coef;
            residual -= coef * start_values[v];
        }
        rows[i][n + i] = 1.0;
        let slack = n + i;
        if residual >= lower[slack] && residual <= upper[slack] {
            // the slack absorbs the residual: start feasible on this
            // row, with the artificial pinned at zero
            rows[i][n + m + i] = 1.0;
            lower[n + m + i] = 0.0;
            upper[n + m + i] = 0.0;
            beta[i] = residual;
            basis.push(slack);
            basic_row[slack] = Some(i);
            nonbasic_at[n + m + i] = NonbasicAt::Lower;
        } else {
            let sigma = if residual >= 0.0 { 1.0 } else { -1.0 };
            rows[i][n + m + i] = sigma;
            if sigma < 0.0 {
                for col in 0..n_cols {
                    rows[i][col] = -rows[i][col];
                }
                beta[i] = -residual;
            } else {
                beta[i] = residual;
            }
            basis.push(n + m + i);
            basic_row[n + m + i] = Some(i);
        }
    }

    let mut tableau = Tableau {
        n_rows: m,
        n_cols,
        rows,
        lower,
        upper,
        basis,
        basic_row,
        nonbasic_at,
        beta,
        reduced: vec![0.0; n_cols],
        iterations: 0,
        bland: false,
        degenerate_streak: 0,
    };

    let iteration_cap = 20_000 + 200 * (m + n_cols);

    // phase 1: drive the artificials to zero
    let mut phase1_costs = vec![0.0; n_cols];
    for col in n + m..n_cols {
        phase1_costs[col] = 1.0;
    }
    tableau.price(&phase1_costs);
    loop {
        if tableau.iterations > iteration_cap {
            return Err(LinoptError::NumericalBreakdown(format!(
                "phase 1 exceeded {iteration_cap} iterations"
            )));
        }
        match tableau.step() {
            StepOutcome::Optimal => break,
            StepOutcome::Unbounded => {
                return Err(LinoptError::NumericalBreakdown(
                    "phase 1 reported unbounded".to_string(),
                ));
            }
            StepOutcome::Progress => {}
        }
    }
    let infeasibility: f64 = (n + m..n_cols).map(|col| tableau.value(col)).sum();
    if infeasibility > FEAS_EPS * (1.0 + b_scale) {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: 0.0,
            values: Vec::new(),
            duals: None,
            iterations: tableau.iterations,
        });
    }
    // artificials are pinned to zero for phase 2
    for col in n + m..n_cols {
        tableau.lower[col] = 0.0;
        tableau.upper[col] = 0.0;
    }

    // phase 2: the real objective, negated for minimization
    let mut phase2_costs = vec![0.0; n_cols];
    for (col, v) in model.variables.iter().enumerate() {
        phase2_costs[col] = -v.objective;
    }
    tableau.bland = false;
    tableau.degenerate_streak = 0;
    tableau.price(&phase2_costs);
    loop {
        if tableau.iterations > iteration_cap {
            return Err(LinoptError::NumericalBreakdown(format!(
                "phase 2 exceeded {iteration_cap} iterations"
            )));
        }
        match tableau.step() {
            StepOutcome::Optimal => break,
            StepOutcome::Unbounded => {
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    objective: f64::INFINITY,
                    values: Vec::new(),
                    duals: None,
                    iterations: tableau.iterations,
                });
            }
            StepOutcome::Progress => {}
        }
    }

    let values: Vec<f64> = (0..n).map(|col| tableau.value(col)).collect();
    let objective = model.objective_at(&values);
    // slack reduced costs are the dual multipliers of the maximization
    let duals = Some((0..m).map(|i| tableau.reduced[n + i]).collect());
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        values,
        duals,
        iterations: tableau.iterations,
    })
}
