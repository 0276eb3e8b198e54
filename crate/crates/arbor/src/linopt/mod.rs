//! Linear models over bounded variables and a self-contained simplex
//! solver for their relaxations.
//!
//! Everything the branch-and-bound engine solves is expressed as a
//! [`LinearModel`]: named variables with bounds, integrality marks and
//! objective coefficients, plus affine constraints. The sense is always
//! maximization.

mod simplex;

use std::io::Write;

use thiserror::Error;

pub use simplex::solve_lp;

/// Feasibility and optimality tolerance of the simplex solver.
pub const FEAS_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LinoptError {
    #[error("constraint {index} references variable {variable} of {n_vars}")]
    BadVariableReference { index: usize, variable: usize, n_vars: usize },
    #[error("variable {0} has lower bound above upper bound")]
    BadBounds(usize),
    #[error("model declares integer variables; relax them to solve as an LP")]
    IntegralModel,
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integral: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One affine constraint: sum of coefficient * variable against a
/// right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Constraint { terms, relation, rhs }
    }

    /// Evaluate the left-hand side at a point.
    pub fn lhs_at(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Signed violation at a point; positive means violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs_at(x);
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A maximization problem over bounded, possibly integral variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Constant added to every objective value.
    pub objective_constant: f64,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integral: bool,
        objective: f64,
    ) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integral,
            objective,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.add_variable(name, 0.0, 1.0, true, objective)
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> usize {
        self.constraints.push(constraint);
        self.constraints.len() - 1
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    /// Indices of all integral variables.
    pub fn integral_variables(&self) -> Vec<usize> {
        (0..self.variables.len())
            .filter(|&v| self.variables[v].integral)
            .collect()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .variables
                .iter()
                .zip(x)
                .map(|(v, &value)| v.objective * value)
                .sum::<f64>()
    }

    /// Largest constraint or bound violation at a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bound_violation = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &value)| (v.lower - value).max(value - v.upper))
            .fold(0.0f64, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(bound_violation, f64::max)
    }

    pub fn validate(&self) -> Result<(), LinoptError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper {
                return Err(LinoptError::BadBounds(i));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            for &(v, _) in &c.terms {
                if v >= self.variables.len() {
                    return Err(LinoptError::BadVariableReference {
                        index: i,
                        variable: v,
                        n_vars: self.variables.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Write the model in fixed-format LP text for cross-checking with
    /// external solvers.
    pub fn write_lp(&self, out: &mut dyn Write) -> Result<(), LinoptError> {
        writeln!(out, "Maximize")?;
        write!(out, " obj:")?;
        let mut first = true;
        for v in &self.variables {
            if v.objective != 0.0 {
                write_term(out, v.objective, &v.name, first)?;
                first = false;
            }
        }
        if first {
            write!(out, " 0 {}", self.variables.first().map_or("x0", |v| v.name.as_str()))?;
        }
        if self.objective_constant != 0.0 {
            if self.objective_constant < 0.0 {
                write!(out, " - {}", fmt_num(-self.objective_constant))?;
            } else {
                write!(out, " + {}", fmt_num(self.objective_constant))?;
            }
        }
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for (i, c) in self.constraints.iter().enumerate() {
            write!(out, " c{}:", i)?;
            let mut first = true;
            for &(v, coef) in &c.terms {
                if coef != 0.0 {
                    write_term(out, coef, &self.variables[v].name, first)?;
                    first = false;
                }
            }
            if first {
                write!(out, " 0 {}", self.variables[0].name)?;
            }
            writeln!(out, " {} {}", c.relation.symbol(), fmt_num(c.rhs))?;
        }
        writeln!(out, "Bounds")?;
        for v in &self.variables {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper))?
                }
                (true, false) => writeln!(out, " {} >= {}", v.name, fmt_num(v.lower))?,
                (false, true) => {
                    writeln!(out, " -inf <= {} <= {}", v.name, fmt_num(v.upper))?
                }
                (false, false) => writeln!(out, " {} free", v.name)?,
            }
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.integral && v.lower == 0.0 && v.upper == 1.0)
            .map(|v| v.name.as_str())
            .collect();
        let generals: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.integral && !(v.lower == 0.0 && v.upper == 1.0))
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            writeln!(out, "Binaries")?;
            for name in binaries {
                writeln!(out, " {name}")?;
            }
        }
        if !generals.is_empty() {
            writeln!(out, "Generals")?;
            for name in generals {
                writeln!(out, " {name}")?;
            }
        }
        writeln!(out, "End")?;
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn write_term(out: &mut dyn Write, coef: f64, name: &str, first: bool) -> std::io::Result<()> {
    if first {
        if coef < 0.0 {
            write!(out, " -")?;
        } else {
            write!(out, " ")?;
        }
    } else if coef < 0.0 {
        write!(out, " - ")?;
    } else {
        write!(out, " + ")?;
    }
    let mag = coef.abs();
    if mag == 1.0 {
        write!(out, "{name}")
    } else {
        write!(out, "{} {name}", fmt_num(mag))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; meaningful only when optimal.
    pub objective: f64,
    /// One value per model variable; meaningful only when optimal.
    pub values: Vec<f64>,
    /// One dual multiplier per constraint, for diagnostics.
    pub duals: Option<Vec<f64>>,
    pub iterations: usize,
}
