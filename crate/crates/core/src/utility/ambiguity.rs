//! Utility ambiguity sets and the worst-case expected utility program.

use opa_lp::{solve_lp, Bounds, LinearProgram, LpStatus, Relation, Sense};
use serde::{Deserialize, Serialize};

use super::pl::{check_grid, integer_grid, integrate_step_against_pl, PiecewiseLinearUtility};
use super::step::{grid_index, StepFunction};
use crate::error::{OpaError, Result};

/// Elicited restriction `int psi du <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub psi: StepFunction,
    pub bound: f64,
}

impl MomentConstraint {
    pub fn new(psi: StepFunction, bound: f64) -> Self {
        MomentConstraint { psi, bound }
    }

    /// The pair `int psi du <= c`, `int -psi du <= -c`.
    pub fn equality(psi: StepFunction, c: f64) -> Vec<Self> {
        let neg = psi.scaled(-1.0);
        vec![MomentConstraint::new(psi, c), MomentConstraint::new(neg, -c)]
    }

    pub fn is_vacuous(&self) -> bool {
        self.psi.is_zero() && self.bound >= 0.0
    }

    /// `int psi du - bound` for `u`; nonpositive when satisfied.
    pub fn slack(&self, u: &PiecewiseLinearUtility) -> Result<f64> {
        Ok(integrate_step_against_pl(&self.psi, u)? - self.bound)
    }
}

/// Constructors for common kinds of partial preference information.
///
/// Positions are grid points `tau`; lotteries are `(outcome, probability)` lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `u(r) = alpha * u(r_prev)`, where `r_prev` is the grid point before `r`.
    RatioScale { r: f64, alpha: f64 },
    /// `u(r) - u(r_prev) = beta`.
    AbsoluteDifference { r: f64, beta: f64 },
    /// `u(r) = gamma`.
    LowerBound { r: f64, gamma: f64 },
    /// Comparison of the lottery `(r1 w.p. 1-p, r3 w.p. p)` with the sure outcome `r2`.
    LotteryComparison { r1: f64, r2: f64, r3: f64, p: f64, prefers_lottery: bool },
    /// `u(low) <= E[u(lottery)] <= u(high)`.
    LotteryBracket { lottery: Vec<(f64, f64)>, low: f64, high: f64 },
    /// The decision maker prefers `preferred` to `other`.
    Dominance { preferred: Vec<(f64, f64)>, other: Vec<(f64, f64)> },
    /// `|int delta du - int delta du_hat| <= radius` for every `delta`.
    PseudoMetricBall { deltas: Vec<StepFunction>, nominal: PiecewiseLinearUtility, radius: f64 },
}

/// `psi` for a pairwise lottery question, signed so that the constraint is
/// `int psi du <= 0` under the given answer.
pub fn lottery_psi(theta: f64, r1: f64, r2: f64, r3: f64, p: f64, prefers_lottery: bool) -> StepFunction {
    let a = StepFunction::indicator_from(theta, r1);
    let b = StepFunction::indicator_from(theta, r3);
    let c = StepFunction::indicator_from(theta, r2);
    // int psi du = u(r2) - (1 - p) u(r1) - p u(r3)
    let psi = StepFunction::combine(theta, [(1.0 - p, &a), (p, &b), (-1.0, &c)]);
    if prefers_lottery {
        psi
    } else {
        psi.scaled(-1.0)
    }
}

pub fn make_constraint(grid: &[f64], kind: &ConstraintKind) -> Result<Vec<MomentConstraint>> {
    check_grid(grid)?;
    let theta = grid[grid.len() - 1];
    let at = |x: f64| grid_index(grid, x).ok_or(OpaError::NonGridBreakpoint(x));
    let previous = |x: f64| -> Result<f64> {
        let k = at(x)?;
        if k == 0 {
            return Err(OpaError::InvalidArg("the first grid point has no predecessor".into()));
        }
        Ok(grid[k - 1])
    };
    let check_lottery = |lottery: &[(f64, f64)]| -> Result<()> {
        for &(h, p) in lottery {
            at(h)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(OpaError::InvalidArg(format!("probability {p} outside [0, 1]")));
            }
        }
        let total: f64 = lottery.iter().map(|l| l.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(OpaError::InvalidArg(format!("lottery probabilities sum to {total}")));
        }
        Ok(())
    };
    let out = match kind {
        ConstraintKind::RatioScale { r, alpha } => {
            let prev = previous(*r)?;
            let f = StepFunction::indicator_upto(theta, *r);
            let g = StepFunction::indicator_upto(theta, prev);
            MomentConstraint::equality(StepFunction::combine(theta, [(1.0, &f), (-alpha, &g)]), 0.0)
        }
        ConstraintKind::AbsoluteDifference { r, beta } => {
            let prev = previous(*r)?;
            MomentConstraint::equality(StepFunction::indicator_between(theta, prev, *r), *beta)
        }
        ConstraintKind::LowerBound { r, gamma } => {
            at(*r)?;
            MomentConstraint::equality(StepFunction::indicator_upto(theta, *r), *gamma)
        }
        ConstraintKind::LotteryComparison { r1, r2, r3, p, prefers_lottery } => {
            for x in [r1, r2, r3] {
                at(*x)?;
            }
            if !(r1 <= r2 && r2 <= r3) || !(0.0..=1.0).contains(p) {
                return Err(OpaError::InvalidArg("lottery needs r1 <= r2 <= r3 and p in [0, 1]".into()));
            }
            vec![MomentConstraint::new(lottery_psi(theta, *r1, *r2, *r3, *p, *prefers_lottery), 0.0)]
        }
        ConstraintKind::LotteryBracket { lottery, low, high } => {
            check_lottery(lottery)?;
            at(*low)?;
            at(*high)?;
            let f = StepFunction::cdf(theta, lottery);
            let lo = StepFunction::indicator_upto(theta, *low);
            let hi = StepFunction::indicator_upto(theta, *high);
            vec![
                MomentConstraint::new(StepFunction::combine(theta, [(1.0, &f), (1.0, &lo)]), 1.0),
                MomentConstraint::new(StepFunction::combine(theta, [(-1.0, &f), (-1.0, &hi)]), -1.0),
            ]
        }
        ConstraintKind::Dominance { preferred, other } => {
            check_lottery(preferred)?;
            check_lottery(other)?;
            let f = StepFunction::cdf(theta, preferred);
            let g = StepFunction::cdf(theta, other);
            vec![MomentConstraint::new(StepFunction::combine(theta, [(1.0, &f), (-1.0, &g)]), 0.0)]
        }
        ConstraintKind::PseudoMetricBall { deltas, nominal, radius } => {
            if *radius < 0.0 {
                return Err(OpaError::InvalidArg("radius must be nonnegative".into()));
            }
            let mut out = Vec::with_capacity(2 * deltas.len());
            for delta in deltas {
                let centre = integrate_step_against_pl(delta, nominal)?;
                out.push(MomentConstraint::new(delta.clone(), radius + centre));
                out.push(MomentConstraint::new(delta.scaled(-1.0), radius - centre));
            }
            out
        }
    };
    for c in &out {
        c.psi.check_on_grid(grid)?;
    }
    Ok(out)
}

/// Monotone, normalized, concave, `lipschitz`-Lipschitz utilities on `grid`
/// satisfying every moment constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityAmbiguitySpec {
    pub grid: Vec<f64>,
    pub lipschitz: f64,
    #[serde(default)]
    pub constraints: Vec<MomentConstraint>,
}

impl UtilityAmbiguitySpec {
    pub fn new(grid: Vec<f64>, lipschitz: f64, constraints: Vec<MomentConstraint>) -> Result<Self> {
        let spec = UtilityAmbiguitySpec { grid, lipschitz, constraints };
        spec.validate()?;
        Ok(spec)
    }

    /// Integer grid `0..=r` without moment constraints.
    pub fn unconstrained(r: usize, lipschitz: f64) -> Result<Self> {
        Self::new(integer_grid(r), lipschitz, Vec::new())
    }

    pub fn theta(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn segments(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(&self.grid)?;
        let theta = self.theta();
        if !self.lipschitz.is_finite() || self.lipschitz * theta < 1.0 - 1e-12 {
            return Err(OpaError::InvalidConfig(format!(
                "Lipschitz modulus {} is below 1/theta = {}",
                self.lipschitz,
                1.0 / theta
            )));
        }
        for c in &self.constraints {
            if (c.psi.theta - theta).abs() > 1e-12 * (1.0 + theta) {
                return Err(OpaError::DomainMismatch { expected: theta, found: c.psi.theta });
            }
            if !c.bound.is_finite() {
                return Err(OpaError::InvalidArg("moment bound must be finite".into()));
            }
            c.psi.check_on_grid(&self.grid)?;
        }
        Ok(())
    }

    /// Whether `u` lies in the set, within `tol`.
    pub fn contains(&self, u: &PiecewiseLinearUtility, tol: f64) -> Result<bool> {
        if !u.check_shape(self.lipschitz, tol) {
            return Ok(false);
        }
        for c in &self.constraints {
            if c.slack(u)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Discrete lottery over outcomes in `[0, theta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub outcomes: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(outcomes: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let s = ScenarioSet { outcomes, probabilities };
        if s.outcomes.is_empty() || s.outcomes.len() != s.probabilities.len() {
            return Err(OpaError::InvalidArg("need one probability per outcome".into()));
        }
        if s.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(OpaError::InvalidArg("probabilities must be nonnegative".into()));
        }
        let total: f64 = s.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(OpaError::InvalidArg(format!("probabilities sum to {total}")));
        }
        Ok(s)
    }

    pub fn single(outcome: f64) -> Self {
        ScenarioSet { outcomes: vec![outcome], probabilities: vec![1.0] }
    }

    /// Equal mass on the ranks `1..=r`.
    pub fn uniform_ranks(r: usize) -> Self {
        ScenarioSet { outcomes: (1..=r).map(|x| x as f64).collect(), probabilities: vec![1.0 / r as f64; r] }
    }

    fn check_domain(&self, theta: f64) -> Result<()> {
        if let Some(&h) = self.outcomes.iter().find(|&&h| !(0.0..=theta).contains(&h)) {
            return Err(OpaError::InvalidArg(format!("outcome {h} lies outside [0, {theta}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportLine {
    pub slope: f64,
    pub intercept: f64,
}

impl SupportLine {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub rho: f64,
    pub utility: PiecewiseLinearUtility,
    pub support_lines: Vec<SupportLine>,
}

pub(crate) enum Normalization {
    /// `u(0) = 0`, `u(theta) = 1`.
    Global,
    /// `u(grid[low]) = 0`, `u(grid[high]) = 1`, values elsewhere unrestricted.
    Local { low: usize, high: usize },
}

/// Variables `y_0..y_R` (grid values) and `mu_0..mu_{R-1}` (slopes), then `extra` free slots.
pub(crate) struct UtilityPolytope {
    pub lp: LinearProgram,
    segments: usize,
}

impl UtilityPolytope {
    pub fn build(
        grid: &[f64],
        slope_cap: Option<f64>,
        constraints: &[MomentConstraint],
        normalization: Normalization,
        extra: usize,
    ) -> Self {
        let segments = grid.len() - 1;
        let n = 2 * segments + 1 + extra;
        let mut poly = UtilityPolytope { lp: LinearProgram::new(Sense::Minimize, vec![0.0; n]), segments };
        let upper = slope_cap.unwrap_or(f64::INFINITY);
        for r in 0..segments {
            let mu = poly.mu(r);
            poly.lp.bounds[mu] = Bounds::new(0.0, upper);
            let (y0, y1, mu) = (poly.y(r), poly.y(r + 1), poly.mu(r));
            poly.lp.add_sparse(&[(y1, 1.0), (y0, -1.0), (mu, -(grid[r + 1] - grid[r]))], Relation::Eq, 0.0);
        }
        for r in 0..segments.saturating_sub(1) {
            let (m0, m1) = (poly.mu(r), poly.mu(r + 1));
            poly.lp.add_sparse(&[(m1, 1.0), (m0, -1.0)], Relation::Le, 0.0);
        }
        for c in constraints {
            let terms: Vec<(usize, f64)> = c
                .psi
                .segment_integrals(grid)
                .into_iter()
                .enumerate()
                .filter(|(_, a)| *a != 0.0)
                .map(|(r, a)| (poly.mu(r), a))
                .collect();
            poly.lp.add_sparse(&terms, Relation::Le, c.bound);
        }
        let (low, high) = match normalization {
            Normalization::Global => (0, segments),
            Normalization::Local { low, high } => {
                for r in 0..=segments {
                    let y = poly.y(r);
                    poly.lp.bounds[y] = Bounds::FREE;
                }
                (low, high)
            }
        };
        let (yl, yh) = (poly.y(low), poly.y(high));
        poly.lp.add_sparse(&[(yl, 1.0)], Relation::Eq, 0.0);
        poly.lp.add_sparse(&[(yh, 1.0)], Relation::Eq, 1.0);
        poly
    }

    pub fn y(&self, r: usize) -> usize {
        r
    }

    pub fn mu(&self, r: usize) -> usize {
        self.segments + 1 + r
    }

    pub fn extra(&self, e: usize) -> usize {
        2 * self.segments + 1 + e
    }

    pub fn set_objective(&mut self, sense: Sense, terms: &[(usize, f64)]) {
        self.lp.sense = sense;
        self.lp.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(v, c) in terms {
            self.lp.objective[v] += c;
        }
    }

    /// Optimal objective, or `None` when the polytope is empty.
    pub fn optimize(&self) -> Result<Option<(f64, Vec<f64>)>> {
        let sol = solve_lp(&self.lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some((sol.objective_value, sol.variable_values))),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(OpaError::SolverFault("utility program is unbounded".into())),
        }
    }
}

fn snapped_utility(grid: &[f64], mut values: Vec<f64>) -> Result<PiecewiseLinearUtility> {
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 1.0;
    for k in 1..=last {
        // Keep the reconstructed utility monotone despite round-off.
        if values[k] < values[k - 1] {
            values[k] = values[k - 1];
        }
    }
    PiecewiseLinearUtility::from_values(grid.to_vec(), values)
}

/// Minimizes expected utility over the ambiguity set.
///
/// Each scenario gets a support line `a_e tau + b_e` lying above every grid
/// value with `a_e >= 0`, so at the optimum `a_e h_e + b_e` equals the
/// piecewise-linear utility at `h_e`.
pub fn solve_worst_case_utility(spec: &UtilityAmbiguitySpec, scenarios: &ScenarioSet) -> Result<Stage1Result> {
    spec.validate()?;
    scenarios.check_domain(spec.theta())?;
    let e_count = scenarios.outcomes.len();
    let mut poly =
        UtilityPolytope::build(&spec.grid, Some(spec.lipschitz), &spec.constraints, Normalization::Global, 2 * e_count);
    let a = |poly: &UtilityPolytope, e: usize| poly.extra(2 * e);
    let b = |poly: &UtilityPolytope, e: usize| poly.extra(2 * e + 1);
    let mut objective = Vec::with_capacity(2 * e_count);
    for e in 0..e_count {
        let (ae, be) = (a(&poly, e), b(&poly, e));
        poly.lp.bounds[be] = Bounds::FREE;
        for (r, &tau) in spec.grid.iter().enumerate() {
            let y = poly.y(r);
            poly.lp.add_sparse(&[(ae, tau), (be, 1.0), (y, -1.0)], Relation::Ge, 0.0);
        }
        let p = scenarios.probabilities[e];
        objective.push((ae, p * scenarios.outcomes[e]));
        objective.push((be, p));
    }
    poly.set_objective(Sense::Minimize, &objective);
    let (rho, x) = poly.optimize()?.ok_or(OpaError::AmbiguitySetEmpty { cell: None })?;
    let values = (0..spec.grid.len()).map(|r| x[poly.y(r)]).collect();
    let support_lines =
        (0..e_count).map(|e| SupportLine { slope: x[a(&poly, e)], intercept: x[b(&poly, e)] }).collect();
    Ok(Stage1Result { rho, utility: snapped_utility(&spec.grid, values)?, support_lines })
}

/// Some member of the ambiguity set, or `AMBIGUITY_SET_EMPTY`.
pub fn feasible_member(spec: &UtilityAmbiguitySpec) -> Result<PiecewiseLinearUtility> {
    spec.validate()?;
    let poly = UtilityPolytope::build(&spec.grid, Some(spec.lipschitz), &spec.constraints, Normalization::Global, 0);
    let (_, x) = poly.optimize()?.ok_or(OpaError::AmbiguitySetEmpty { cell: None })?;
    snapped_utility(&spec.grid, x[..spec.grid.len()].to_vec())
}

/// `[min u(tau_r), max u(tau_r)]` over the ambiguity set, for every grid point.
pub fn utility_band(spec: &UtilityAmbiguitySpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let mut poly =
        UtilityPolytope::build(&spec.grid, Some(spec.lipschitz), &spec.constraints, Normalization::Global, 0);
    let mut band = Vec::with_capacity(spec.grid.len());
    for r in 0..spec.grid.len() {
        let y = poly.y(r);
        poly.set_objective(Sense::Minimize, &[(y, 1.0)]);
        let (lo, _) = poly.optimize()?.ok_or(OpaError::AmbiguitySetEmpty { cell: None })?;
        poly.set_objective(Sense::Maximize, &[(y, 1.0)]);
        let (hi, _) = poly.optimize()?.ok_or(OpaError::AmbiguitySetEmpty { cell: None })?;
        band.push((lo, hi));
    }
    Ok(band)
}

/// Range of `u(grid[mid])` with `u(grid[low]) = 0` and `u(grid[high]) = 1`.
///
/// Returns `None` when that normalization is incompatible with the constraints.
pub(crate) fn local_range(
    grid: &[f64],
    slope_cap: Option<f64>,
    constraints: &[MomentConstraint],
    low: usize,
    mid: usize,
    high: usize,
) -> Result<Option<(f64, f64)>> {
    let mut poly = UtilityPolytope::build(grid, slope_cap, constraints, Normalization::Local { low, high }, 0);
    let y = poly.y(mid);
    poly.set_objective(Sense::Minimize, &[(y, 1.0)]);
    let Some((lo, _)) = poly.optimize()? else {
        return Ok(None);
    };
    poly.set_objective(Sense::Maximize, &[(y, 1.0)]);
    let Some((hi, _)) = poly.optimize()? else {
        return Ok(None);
    };
    Ok(Some((lo, hi.max(lo))))
}
