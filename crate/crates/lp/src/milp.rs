use serde::{Deserialize, Serialize};

use crate::problem::{LinearProgram, LpSolution, LpStatus, Sense};
use crate::{solve_lp, LpError, ABS_GAP, MAX_BINARIES, NODE_LIMIT};

const INTEGRALITY_TOL: f64 = 1e-9;

/// A linear program with some variables restricted to `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProgram {
    pub base: LinearProgram,
    pub binary_indices: Vec<usize>,
}

impl MixedProgram {
    pub fn new(base: LinearProgram, binary_indices: Vec<usize>) -> Self {
        MixedProgram { base, binary_indices }
    }
}

/// Depth-first branch-and-bound over the binary variables of `problem`.
///
/// Each node solves the LP relaxation with some binaries fixed; nodes whose
/// relaxation cannot beat the incumbent by more than [`ABS_GAP`] are pruned.
/// Branching takes the lowest-index fractional binary and explores the
/// nearer rounding first.
pub fn solve_milp(problem: &MixedProgram) -> Result<LpSolution, LpError> {
    let base = &problem.base;
    base.validate()?;
    let mut binaries = problem.binary_indices.clone();
    binaries.sort_unstable();
    binaries.dedup();
    if binaries.len() > MAX_BINARIES {
        return Err(LpError::TooManyBinaries { count: binaries.len() });
    }
    if let Some(&j) = binaries.iter().find(|&&j| j >= base.num_vars()) {
        return Err(LpError::MalformedProblem(format!("binary index {j} out of range")));
    }

    let mut root = base.clone();
    for &j in &binaries {
        let b = root.bounds[j];
        let (lo, hi) = (b.lower.max(0.0).ceil(), b.upper.min(1.0).floor());
        if lo > hi {
            return Ok(LpSolution::infeasible());
        }
        root.set_bounds(j, lo, hi);
    }

    // Compare everything in maximization terms.
    let sign = match base.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut nodes = 0usize;

    while let Some(fixings) = stack.pop() {
        nodes += 1;
        if nodes > NODE_LIMIT {
            return Err(LpError::NodeLimit);
        }
        let mut node = root.clone();
        for &(j, v) in &fixings {
            node.set_bounds(j, v, v);
        }
        let relaxed = solve_lp(&node)?;
        match relaxed.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if fixings.is_empty() {
                    return Ok(relaxed);
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = sign * relaxed.objective_value;
        if let Some((best, _)) = &incumbent {
            if bound <= best + ABS_GAP {
                continue;
            }
        }
        let x = relaxed.variable_values;
        let fractional = binaries.iter().copied().find(|&j| (x[j] - x[j].round()).abs() > INTEGRALITY_TOL);
        match fractional {
            None => {
                let mut x = x;
                for &j in &binaries {
                    x[j] = x[j].round();
                }
                let value = sign * base.objective_value(&x);
                incumbent = Some((value, x));
            }
            Some(j) => {
                let near = x[j].round();
                for v in [1.0 - near, near] {
                    let mut child = fixings.clone();
                    child.push((j, v));
                    stack.push(child);
                }
            }
        }
    }

    Ok(match incumbent {
        Some((_, x)) => LpSolution::optimal(base, x),
        None => LpSolution::infeasible(),
    })
}
