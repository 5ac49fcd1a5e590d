use serde::{Deserialize, Serialize};

use crate::{LpError, FEAS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NONNEGATIVE: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };
    pub const FREE: Bounds = Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::NONNEGATIVE
    }
}

/// A linear program over `objective.len()` variables.
///
/// Variables default to `[0, +inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), bounds: vec![Bounds::NONNEGATIVE; n] }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coefficients, relation, rhs });
        self.constraints.len() - 1
    }

    /// Adds a row given as `(variable, coefficient)` pairs. Repeated indices accumulate.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        let mut row = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            row[j] += a;
        }
        self.add_constraint(row, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = Bounds { lower, upper };
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self.bounds.iter().zip(x).map(|(b, &v)| {
            let lo = if b.lower.is_finite() { (b.lower - v).max(0.0) } else { 0.0 };
            let hi = if b.upper.is_finite() { (v - b.upper).max(0.0) } else { 0.0 };
            lo.max(hi)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::MalformedProblem(format!("{} bounds for {} variables", self.bounds.len(), n)));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::MalformedProblem("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(LpError::MalformedProblem(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coefficients.len()
                )));
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(LpError::MalformedProblem(format!("constraint {i} is not finite")));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower > b.upper {
                return Err(LpError::MalformedProblem(format!("variable {j} has bounds [{}, {}]", b.lower, b.upper)));
            }
            if b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::MalformedProblem(format!("variable {j} has an empty bound range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the problem's own sense. NaN when infeasible, +/-inf when unbounded.
    pub objective_value: f64,
    /// Empty unless the status is optimal.
    pub variable_values: Vec<f64>,
    /// Indices of constraints that hold with equality within [`FEAS_TOL`].
    pub active_set: Vec<usize>,
}

impl LpSolution {
    pub(crate) fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            objective_value: f64::NAN,
            variable_values: Vec::new(),
            active_set: Vec::new(),
        }
    }

    pub(crate) fn unbounded(sense: Sense) -> Self {
        LpSolution {
            status: LpStatus::Unbounded,
            objective_value: match sense {
                Sense::Maximize => f64::INFINITY,
                Sense::Minimize => f64::NEG_INFINITY,
            },
            variable_values: Vec::new(),
            active_set: Vec::new(),
        }
    }

    pub(crate) fn optimal(problem: &LinearProgram, x: Vec<f64>) -> Self {
        let active_set = problem
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| (c.activity(&x) - c.rhs).abs() <= FEAS_TOL)
            .map(|(i, _)| i)
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            objective_value: problem.objective_value(&x),
            variable_values: x,
            active_set,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
