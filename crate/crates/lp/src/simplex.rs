use log::{log_enabled, trace, Level};

use crate::problem::{LinearProgram, LpSolution, Relation, Sense};
use crate::{LpError, FEAS_TOL, MAX_PIVOTS, OPT_TOL, TRACE_TARGET};

const PIVOT_TOL: f64 = 1e-11;
const RATIO_TIE_TOL: f64 = 1e-12;

/// Solves `problem` with a two-phase dense primal simplex.
///
/// Entering and leaving variables follow Bland's rule (lowest index first),
/// which rules out cycling and makes the pivot sequence a pure function of
/// the input.
pub fn solve_lp(problem: &LinearProgram) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let std = StandardForm::build(problem);
    let mut tab = Tableau::new(&std);
    let mut pivots = 0usize;

    trace!(target: TRACE_TARGET, "phase 1: {} rows, {} columns", tab.m, tab.ncols);
    if tab.n_art > 0 {
        let cost: Vec<f64> = (0..tab.ncols).map(|j| if tab.is_art[j] { 1.0 } else { 0.0 }).collect();
        let allowed = vec![true; tab.ncols];
        // Phase 1 is bounded below by zero, so it never reports unbounded.
        let _ = tab.run_phase(&cost, &allowed, &mut pivots)?;
        let infeasibility: f64 = (0..tab.m).filter(|&i| tab.is_art[tab.basis[i]]).map(|i| tab.rhs(i)).sum();
        let scale = 1.0 + std.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeasibility > FEAS_TOL * scale {
            trace!(target: TRACE_TARGET, "phase 1 residual {infeasibility:e}: infeasible");
            return Ok(LpSolution::infeasible());
        }
        tab.drive_out_artificials();
    }

    trace!(target: TRACE_TARGET, "phase 2");
    let mut cost = vec![0.0; tab.ncols];
    cost[..std.n_struct].copy_from_slice(&std.cost);
    let allowed: Vec<bool> = tab.is_art.iter().map(|a| !a).collect();
    if tab.run_phase(&cost, &allowed, &mut pivots)? == PhaseOutcome::Unbounded {
        return Ok(LpSolution::unbounded(problem.sense));
    }
    trace!(target: TRACE_TARGET, "optimal after {pivots} pivots");

    let from_tableau = tab.structural_values(std.n_struct);
    let refined = tab.refactor_values(&std).unwrap_or_else(|| from_tableau.clone());
    let x_tab = std.recover(&from_tableau);
    let x_ref = std.recover(&refined);
    let (x, violation) = {
        let v_tab = problem.max_violation(&x_tab);
        let v_ref = problem.max_violation(&x_ref);
        if v_ref <= v_tab {
            (x_ref, v_ref)
        } else {
            (x_tab, v_tab)
        }
    };
    let scale = 1.0 + x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if violation > 1e-7 * scale {
        return Err(LpError::NumericalTrouble { violation });
    }
    Ok(LpSolution::optimal(problem, x))
}

/// Problem rewritten as `min c'x', A x' (rel) b, x' >= 0, b >= 0`.
struct StandardForm {
    n_struct: usize,
    /// For each original variable: constant offset plus `(column, coefficient)` terms.
    var_map: Vec<(f64, Vec<(usize, f64)>)>,
    rows: Vec<Vec<f64>>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
}

impl StandardForm {
    fn build(problem: &LinearProgram) -> Self {
        let mut var_map = Vec::with_capacity(problem.num_vars());
        let mut n_struct = 0usize;
        // Rows expressing finite upper bounds of shifted variables: (column, width).
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for b in &problem.bounds {
            if b.lower.is_finite() {
                let col = n_struct;
                n_struct += 1;
                if b.upper.is_finite() {
                    bound_rows.push((col, b.upper - b.lower));
                }
                var_map.push((b.lower, vec![(col, 1.0)]));
            } else if b.upper.is_finite() {
                let col = n_struct;
                n_struct += 1;
                var_map.push((b.upper, vec![(col, -1.0)]));
            } else {
                let col = n_struct;
                n_struct += 2;
                var_map.push((0.0, vec![(col, 1.0), (col + 1, -1.0)]));
            }
        }

        let sign = match problem.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n_struct];
        for (j, c) in problem.objective.iter().enumerate() {
            for &(col, k) in &var_map[j].1 {
                cost[col] += sign * c * k;
            }
        }

        let mut rows = Vec::new();
        let mut relations = Vec::new();
        let mut rhs = Vec::new();
        for c in &problem.constraints {
            let mut row = vec![0.0; n_struct];
            let mut b = c.rhs;
            for (j, a) in c.coefficients.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let (offset, terms) = &var_map[j];
                b -= a * offset;
                for &(col, k) in terms {
                    row[col] += a * k;
                }
            }
            rows.push(row);
            relations.push(c.relation);
            rhs.push(b);
        }
        for (col, width) in bound_rows {
            let mut row = vec![0.0; n_struct];
            row[col] = 1.0;
            rows.push(row);
            relations.push(Relation::Le);
            rhs.push(width);
        }
        for i in 0..rows.len() {
            if rhs[i] < 0.0 {
                rhs[i] = -rhs[i];
                rows[i].iter_mut().for_each(|a| *a = -*a);
                relations[i] = match relations[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        StandardForm { n_struct, var_map, rows, relations, rhs, cost }
    }

    fn recover(&self, structural: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|(offset, terms)| offset + terms.iter().map(|&(col, k)| k * structural[col]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    n_art: usize,
    /// Row-major `m x (ncols + 1)`; the last column is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    is_art: Vec<bool>,
    /// Standard-form row each tableau row came from.
    origin: Vec<usize>,
    /// Standard-form row and sign of each slack or artificial unit column.
    unit_of: Vec<Option<(usize, f64)>>,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let m = std.rows.len();
        let n_slack = std.relations.iter().filter(|r| matches!(r, Relation::Le | Relation::Ge)).count();
        let n_art = std.relations.iter().filter(|r| matches!(r, Relation::Ge | Relation::Eq)).count();
        let ncols = std.n_struct + n_slack + n_art;
        let width = ncols + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0usize; m];
        let mut is_art = vec![false; ncols];
        let mut unit_of = vec![None; ncols];
        let mut next_slack = std.n_struct;
        let mut next_art = std.n_struct + n_slack;
        for i in 0..m {
            let row = &mut data[i * width..(i + 1) * width];
            row[..std.n_struct].copy_from_slice(&std.rows[i]);
            row[ncols] = std.rhs[i];
            match std.relations[i] {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    unit_of[next_slack] = Some((i, 1.0));
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    unit_of[next_slack] = Some((i, -1.0));
                    next_slack += 1;
                    row[next_art] = 1.0;
                    is_art[next_art] = true;
                    unit_of[next_art] = Some((i, 1.0));
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    is_art[next_art] = true;
                    unit_of[next_art] = Some((i, 1.0));
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Tableau { m, ncols, n_art, data, basis, is_art, origin: (0..m).collect(), unit_of }
    }

    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.ncols)
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let w = self.width();
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[c] = 0.0;
                if row[w - 1] < 0.0 && row[w - 1] > -RATIO_TIE_TOL {
                    row[w - 1] = 0.0;
                }
            }
        }
        let f = reduced[c];
        if f != 0.0 {
            for (v, pr) in reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            reduced[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut d = vec![0.0; w];
        d[..self.ncols].copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(&self.data[i * w..(i + 1) * w]) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn run_phase(&mut self, cost: &[f64], allowed: &[bool], pivots: &mut usize) -> Result<PhaseOutcome, LpError> {
        let mut reduced = self.reduced_costs(cost);
        let mut basic = vec![false; self.ncols];
        for &b in &self.basis {
            basic[b] = true;
        }
        loop {
            self.dump();
            let entering = (0..self.ncols).find(|&j| allowed[j] && !basic[j] && reduced[j] < -OPT_TOL);
            let Some(c) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= RATIO_TIE_TOL * best.abs().max(1.0);
                        if (!tie && ratio < best) || (tie && self.basis[i] < self.basis[r]) {
                            Some((i, ratio.min(best)))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leaving else {
                trace!(target: TRACE_TARGET, "column {c} improves without bound");
                return Ok(PhaseOutcome::Unbounded);
            };
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(LpError::SolverStall { pivots: MAX_PIVOTS });
            }
            trace!(target: TRACE_TARGET, "pivot {}: enter {c}, leave {} (row {r})", pivots, self.basis[r]);
            basic[self.basis[r]] = false;
            basic[c] = true;
            self.pivot(r, c, &mut reduced);
        }
    }

    /// Pivots basic artificials (all at zero level after phase 1) out of the
    /// basis, dropping rows that turn out to be linearly dependent.
    fn drive_out_artificials(&mut self) {
        let mut scratch = vec![0.0; self.width()];
        let mut i = 0;
        while i < self.m {
            if !self.is_art[self.basis[i]] {
                i += 1;
                continue;
            }
            let col = (0..self.ncols).find(|&j| !self.is_art[j] && self.at(i, j).abs() > 1e-9);
            match col {
                Some(c) => {
                    self.pivot(i, c, &mut scratch);
                    i += 1;
                }
                None => {
                    trace!(target: TRACE_TARGET, "dropping redundant row {}", self.origin[i]);
                    let w = self.width();
                    self.data.drain(i * w..(i + 1) * w);
                    self.basis.remove(i);
                    self.origin.remove(i);
                    self.m -= 1;
                }
            }
        }
    }

    fn structural_values(&self, n_struct: usize) -> Vec<f64> {
        let mut x = vec![0.0; n_struct];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < n_struct {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        x
    }

    /// Recomputes basic values by solving `B x_B = b` against the original
    /// standard-form data, which removes drift accumulated over pivots.
    fn refactor_values(&self, std: &StandardForm) -> Option<Vec<f64>> {
        let m = self.m;
        if m == 0 {
            return Some(vec![0.0; std.n_struct]);
        }
        let mut mat = vec![0.0; m * m];
        for (k, &col) in self.basis.iter().enumerate() {
            for (i, &orig) in self.origin.iter().enumerate() {
                let v = if col < std.n_struct {
                    std.rows[orig][col]
                } else {
                    match self.unit_of[col] {
                        Some((row, sign)) if row == orig => sign,
                        _ => 0.0,
                    }
                };
                mat[i * m + k] = v;
            }
        }
        let rhs: Vec<f64> = self.origin.iter().map(|&o| std.rhs[o]).collect();
        let xb = solve_dense(mat, rhs, m)?;
        let mut x = vec![0.0; std.n_struct];
        for (k, &col) in self.basis.iter().enumerate() {
            if col < std.n_struct {
                x[col] = xb[k].max(0.0);
            }
        }
        Some(x)
    }

    fn dump(&self) {
        if !log_enabled!(target: TRACE_TARGET, Level::Trace) {
            return;
        }
        let w = self.width();
        for i in 0..self.m {
            let row: Vec<String> = self.data[i * w..(i + 1) * w].iter().map(|v| format!("{v:.4}")).collect();
            trace!(target: TRACE_TARGET, "  x{:<4} | {}", self.basis[i], row.join(" "));
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` matrix.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
        if a[p * n + k].abs() < 1e-13 {
            return None;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Bounds, LpStatus};

    #[test]
    fn single_variable_bound() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
        assert!((sol.variable_values[0] - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_set, vec![0]);
    }

    #[test]
    fn empty_feasible_set() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        assert_eq!(sol.objective_value, f64::INFINITY);
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min x + y with x free, y <= 2, x + y >= -3, x >= -5 through a row.
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.bounds[0] = Bounds::FREE;
        lp.bounds[1] = Bounds::new(f64::NEG_INFINITY, 2.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, -3.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Ge, -5.0);
        lp.add_constraint(vec![0.0, 1.0], Relation::Ge, -1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 3.0).abs() < 1e-12);
        assert!(lp.max_violation(&sol.variable_values) <= FEAS_TOL);
    }

    #[test]
    fn boxed_variable_and_equality() {
        let mut lp = LinearProgram::maximize(vec![3.0, 2.0]);
        lp.set_bounds(0, 1.0, 1.5);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.variable_values[0] - 1.5).abs() < 1e-12);
        assert!((sol.objective_value - 5.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_malformed() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::MalformedProblem(_))));
    }

    #[test]
    fn inverted_bounds_are_malformed() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve_lp(&lp).unwrap_err().code(), "MALFORMED_PROBLEM");
    }

    #[test]
    fn degenerate_klee_minty_style_problem_terminates() {
        // Beale's cycling example; Bland's rule must terminate.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 0.05).abs() < 1e-10);
    }
}
