//! Preference-robust OPA: worst-case utilities per (expert, attribute) feed
//! a second-stage weight program whose attribute ranks are taken at the
//! optimistic end of their intervals.

use opa_lp::{solve_lp, LinearProgram, Relation};
use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};
use crate::opa::{aggregate_weights, flat_index, unflatten, GroupWeights, RankingProfile, WeightSolution};
use crate::utility::{
    solve_worst_case_utility, PiecewiseLinearUtility, ScenarioSet, Stage1Result, UtilityAmbiguitySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankInterval {
    pub lo: usize,
    pub hi: usize,
}

impl RankInterval {
    pub fn point(rank: usize) -> Self {
        RankInterval { lo: rank, hi: rank }
    }
}

/// Ranking profile with attribute-rank intervals and one utility per (expert, attribute).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrProfile {
    pub ranking: RankingProfile,
    pub s_intervals: Vec<Vec<RankInterval>>,
    pub utilities: Vec<Vec<PiecewiseLinearUtility>>,
}

fn check_intervals(ranking: &RankingProfile, s_intervals: &[Vec<RankInterval>]) -> Result<()> {
    let (ni, nj) = (ranking.num_experts(), ranking.num_attributes());
    if s_intervals.len() != ni || s_intervals.iter().any(|row| row.len() != nj) {
        return Err(OpaError::InvalidProfile(format!("attribute intervals must be {ni} x {nj}")));
    }
    for (i, row) in s_intervals.iter().enumerate() {
        for (j, iv) in row.iter().enumerate() {
            if !(1 <= iv.lo && iv.lo <= iv.hi && iv.hi <= nj) {
                return Err(OpaError::InvalidProfile(format!(
                    "attribute interval [{}, {}] at ({i}, {j}) is outside 1..={nj}",
                    iv.lo, iv.hi
                )));
            }
        }
    }
    Ok(())
}

/// Intervals collapsed onto the nominal attribute ranks.
pub fn degenerate_intervals(ranking: &RankingProfile) -> Vec<Vec<RankInterval>> {
    ranking.s.iter().map(|row| row.iter().map(|&s| RankInterval::point(s)).collect()).collect()
}

impl PrProfile {
    pub fn new(
        ranking: RankingProfile,
        s_intervals: Vec<Vec<RankInterval>>,
        utilities: Vec<Vec<PiecewiseLinearUtility>>,
    ) -> Result<Self> {
        ranking.validate()?;
        check_intervals(&ranking, &s_intervals)?;
        let (ni, nj) = (ranking.num_experts(), ranking.num_attributes());
        if utilities.len() != ni || utilities.iter().any(|row| row.len() != nj) {
            return Err(OpaError::InvalidProfile(format!("utilities must be {ni} x {nj}")));
        }
        Ok(PrProfile { ranking, s_intervals, utilities })
    }

    /// Every (expert, attribute) pair gets the same utility.
    pub fn uniform(
        ranking: RankingProfile,
        s_intervals: Vec<Vec<RankInterval>>,
        utility: PiecewiseLinearUtility,
    ) -> Result<Self> {
        let rows = vec![vec![utility; ranking.num_attributes()]; ranking.num_experts()];
        Self::new(ranking, s_intervals, rows)
    }

    pub fn ranks(&self) -> usize {
        self.ranking.num_alternatives()
    }

    pub fn s_lo(&self, i: usize, j: usize) -> f64 {
        self.s_intervals[i][j].lo as f64
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.ranking.num_experts(), self.ranking.num_attributes(), self.ranking.num_alternatives())
    }
}

/// `u[i][j][p]` is the normalized utility of rank position `p + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedUtilityTable {
    pub u: Vec<Vec<Vec<f64>>>,
}

impl NormalizedUtilityTable {
    /// The same row for every (expert, attribute) pair.
    pub fn uniform(ni: usize, nj: usize, row: Vec<f64>) -> Self {
        NormalizedUtilityTable { u: vec![vec![row; nj]; ni] }
    }

    fn check_against(&self, profile: &PrProfile) -> Result<()> {
        let (ni, nj, nk) = profile.dims();
        let shape_ok =
            self.u.len() == ni && self.u.iter().all(|row| row.len() == nj && row.iter().all(|c| c.len() == nk));
        if !shape_ok {
            return Err(OpaError::InvalidArg(format!("utility table must be {ni} x {nj} x {nk}")));
        }
        Ok(())
    }
}

/// Utility values at ranks `R, R-1, .., 1`, divided by their sum.
pub fn normalized_row(values_at_ranks: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = values_at_ranks.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(values_at_ranks.iter().rev().map(|v| v / total).collect())
}

pub fn normalize_utilities(profile: &PrProfile) -> Result<NormalizedUtilityTable> {
    let (ni, nj, nk) = profile.dims();
    let mut u = vec![vec![Vec::new(); nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            let util = &profile.utilities[i][j];
            if (util.theta() - nk as f64).abs() > 1e-12 {
                return Err(OpaError::DomainMismatch { expected: nk as f64, found: util.theta() });
            }
            let values: Vec<f64> = (1..=nk).map(|r| util.value_at(r as f64)).collect();
            u[i][j] = normalized_row(&values).ok_or(OpaError::ZeroUtilitySum { i, j })?;
        }
    }
    Ok(NormalizedUtilityTable { u })
}

/// Maximize `z` subject to `R U_ijr z <= t_i s_lo_ij w_ijr` and `sum w = 1`.
pub fn build_stage2_lp(profile: &PrProfile, table: &NormalizedUtilityTable) -> Result<LinearProgram> {
    table.check_against(profile)?;
    let (ni, nj, nk) = profile.dims();
    let n = 1 + ni * nj * nk;
    let mut objective = vec![0.0; n];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for i in 0..ni {
        for j in 0..nj {
            let ts = profile.ranking.t[i] as f64 * profile.s_lo(i, j);
            for p in 0..nk {
                let coef = nk as f64 * table.u[i][j][p];
                lp.add_sparse(&[(0, coef), (1 + flat_index(nj, nk, i, j, p), -ts)], Relation::Le, 0.0);
            }
        }
    }
    let ones: Vec<(usize, f64)> = (1..n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    Ok(lp)
}

pub fn solve_stage2_lp(profile: &PrProfile, table: &NormalizedUtilityTable) -> Result<WeightSolution> {
    let lp = build_stage2_lp(profile, table)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(OpaError::SolverFault(format!("stage-2 program reported {:?}", sol.status)));
    }
    let (ni, nj, nk) = profile.dims();
    Ok(WeightSolution {
        z: sol.variable_values[0],
        w: unflatten(&sol.variable_values[1..], ni, nj, nk),
        rank_to_alternative: profile.ranking.rank_to_alternative(),
    })
}

pub fn solve_stage2_closed_form(profile: &PrProfile, table: &NormalizedUtilityTable) -> Result<WeightSolution> {
    table.check_against(profile)?;
    let (ni, nj, nk) = profile.dims();
    let r = nk as f64;
    let scaled: Vec<Vec<Vec<f64>>> = (0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| {
                    let ts = profile.ranking.t[i] as f64 * profile.s_lo(i, j);
                    table.u[i][j].iter().map(|u| r * u / ts).collect()
                })
                .collect()
        })
        .collect();
    let z = 1.0 / scaled.iter().flatten().flatten().sum::<f64>();
    let w = scaled
        .into_iter()
        .map(|row| row.into_iter().map(|cell| cell.into_iter().map(|v| v * z).collect()).collect())
        .collect();
    Ok(WeightSolution { z, w, rank_to_alternative: profile.ranking.rank_to_alternative() })
}

/// `1 / (R sum_i (1/t_i) sum_j 1/s_lo_ij)`, the stage-2 disparity for any utility table.
pub fn invariant_disparity(profile: &PrProfile) -> f64 {
    let (ni, nj, nk) = profile.dims();
    let total: f64 =
        (0..ni).map(|i| (0..nj).map(|j| 1.0 / profile.s_lo(i, j)).sum::<f64>() / profile.ranking.t[i] as f64).sum();
    1.0 / (nk as f64 * total)
}

/// Per-weight bound on the error caused by approximating the true utility
/// with the profile's piecewise-linear utilities.
pub fn error_bound(profile: &PrProfile, lipschitz: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    let (ni, nj, nk) = profile.dims();
    if nk < 2 {
        return Err(OpaError::BoundUndefined);
    }
    if lipschitz * (nk as f64) < 1.0 - 1e-12 {
        return Err(OpaError::InvalidConfig(format!("Lipschitz modulus {lipschitz} is below 1/R")));
    }
    let table = normalize_utilities(profile)?;
    let z = solve_stage2_closed_form(profile, &table)?.z;
    let r = nk as f64;
    Ok((0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| {
                    let u = &profile.utilities[i][j];
                    let total: f64 = (1..=nk).map(|h| u.value_at(h as f64)).sum();
                    let factor = r * z / (profile.ranking.t[i] as f64 * profile.s_lo(i, j));
                    (1..=nk)
                        .map(|p| {
                            let v = u.value_at((nk + 1 - p) as f64);
                            factor * (2.0 * (lipschitz + v) / (r - 1.0) - v / total)
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Full two-stage input: ambiguity sets and scenario lotteries per (expert, attribute).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrInstance {
    pub ranking: RankingProfile,
    pub s_intervals: Vec<Vec<RankInterval>>,
    pub specs: Vec<Vec<UtilityAmbiguitySpec>>,
    /// `None` means equal mass on every rank.
    pub scenarios: Vec<Vec<Option<ScenarioSet>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrSolution {
    pub stage1: Vec<Vec<Stage1Result>>,
    pub table: NormalizedUtilityTable,
    pub weights: WeightSolution,
    pub groups: GroupWeights,
    /// Largest deviation between the closed form and the LP, when checked.
    pub lp_deviation: Option<f64>,
}

pub fn solve_opa_pr(instance: &PrInstance, lp_cross_check: bool) -> Result<PrSolution> {
    let ranking = &instance.ranking;
    ranking.validate()?;
    check_intervals(ranking, &instance.s_intervals)?;
    let (ni, nj, nk) = (ranking.num_experts(), ranking.num_attributes(), ranking.num_alternatives());
    let shape_ok = |n: usize, m: usize| n == ni && m == nj;
    if !shape_ok(instance.specs.len(), instance.specs.first().map_or(0, Vec::len))
        || instance.specs.iter().any(|r| r.len() != nj)
        || !shape_ok(instance.scenarios.len(), instance.scenarios.first().map_or(0, Vec::len))
        || instance.scenarios.iter().any(|r| r.len() != nj)
    {
        return Err(OpaError::InvalidProfile(format!("specs and scenarios must be {ni} x {nj}")));
    }
    let mut stage1 = Vec::with_capacity(ni);
    for i in 0..ni {
        let mut row = Vec::with_capacity(nj);
        for j in 0..nj {
            let default = ScenarioSet::uniform_ranks(nk);
            let scenarios = instance.scenarios[i][j].as_ref().unwrap_or(&default);
            let res = solve_worst_case_utility(&instance.specs[i][j], scenarios).map_err(|e| match e {
                OpaError::AmbiguitySetEmpty { .. } => OpaError::AmbiguitySetEmpty { cell: Some((i, j)) },
                other => other,
            })?;
            row.push(res);
        }
        stage1.push(row);
    }
    let utilities = stage1.iter().map(|row| row.iter().map(|r| r.utility.clone()).collect()).collect();
    let profile = PrProfile::new(ranking.clone(), instance.s_intervals.clone(), utilities)?;
    let table = normalize_utilities(&profile)?;
    let weights = solve_stage2_closed_form(&profile, &table)?;
    let lp_deviation = if lp_cross_check {
        let lp = solve_stage2_lp(&profile, &table)?;
        let dev =
            lp.flat().iter().zip(weights.flat()).map(|(a, b)| (a - b).abs()).fold((lp.z - weights.z).abs(), f64::max);
        if dev > 1e-8 {
            return Err(OpaError::SolverFault(format!("closed form and LP disagree by {dev:e}")));
        }
        Some(dev)
    } else {
        None
    };
    let groups = aggregate_weights(&weights);
    Ok(PrSolution { stage1, table, weights, groups, lp_deviation })
}
