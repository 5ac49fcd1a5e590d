//! Dense linear programming for the small problems built by the OPA family.
//!
//! [`solve_lp`] is a two-phase primal simplex on a dense tableau with
//! Bland's anti-cycling rule, so identical inputs always take the identical
//! pivot path. [`solve_milp`] wraps it in a depth-first branch-and-bound over
//! binary variables.
//!
//! Tableau dumps are emitted through `log` under the `opa_lp::tableau`
//! target at trace level.

mod milp;
mod problem;
mod simplex;

pub use milp::{solve_milp, MixedProgram};
pub use problem::{Bounds, Constraint, LinearProgram, LpSolution, LpStatus, Relation, Sense};
pub use simplex::solve_lp;

/// Primal feasibility tolerance applied to constraints and bounds.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for the optimality test.
pub const OPT_TOL: f64 = 1e-9;
/// Pivot budget shared by both simplex phases.
pub const MAX_PIVOTS: usize = 50_000;
/// Absolute gap used to prune branch-and-bound nodes.
pub const ABS_GAP: f64 = 1e-7;
/// Upper limit on the number of binary variables accepted by [`solve_milp`].
pub const MAX_BINARIES: usize = 64;
/// Node budget for [`solve_milp`].
pub const NODE_LIMIT: usize = 1_000_000;

/// Log target used for tableau traces.
pub const TRACE_TARGET: &str = "opa_lp::tableau";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("simplex stalled after {pivots} pivots")]
    SolverStall { pivots: usize },
    #[error("solution failed the feasibility re-check (violation {violation:e})")]
    NumericalTrouble { violation: f64 },
    #[error("{count} binary variables exceed the limit of {MAX_BINARIES}")]
    TooManyBinaries { count: usize },
    #[error("branch-and-bound node limit of {NODE_LIMIT} reached")]
    NodeLimit,
}

impl LpError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            LpError::MalformedProblem(_) => "MALFORMED_PROBLEM",
            LpError::SolverStall { .. } => "SOLVER_STALL",
            LpError::NumericalTrouble { .. } => "NUMERICAL_TROUBLE",
            LpError::TooManyBinaries { .. } => "TOO_MANY_BINARIES",
            LpError::NodeLimit => "NODE_LIMIT",
        }
    }
}
