//! Stage-2 variants that tolerate inconsistent elicitation: a total slack
//! budget on the disparity rows, perturbed utility arguments, and a MILP that
//! may discard a bounded share of rows per (expert, attribute).

use opa_lp::{solve_lp, solve_milp, LinearProgram, LpStatus, MixedProgram, Relation};
use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};
use crate::opa::{flat_index, unflatten, WeightSolution};
use crate::pr::{normalize_utilities, normalized_row, solve_stage2_closed_form, NormalizedUtilityTable, PrProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InconsistencyConfig {
    DisparityBudget {
        /// Defaults to a tenth of the stage-2 disparity.
        #[serde(default)]
        budget: Option<f64>,
    },
    RankPerturbation {
        gamma: Vec<Vec<Vec<f64>>>,
    },
    ErroneousElicitation {
        z_target: f64,
        error_fractions: Vec<Vec<f64>>,
        #[serde(default)]
        big_m: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSolution {
    pub weights: WeightSolution,
    pub slack: Vec<Vec<Vec<f64>>>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErroneousSolution {
    pub weights: WeightSolution,
    pub discarded: Vec<Vec<Vec<bool>>>,
    pub big_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InconsistencyOutcome {
    DisparityBudget(BudgetSolution),
    RankPerturbation { weights: WeightSolution, table: NormalizedUtilityTable },
    ErroneousElicitation(ErroneousSolution),
}

impl InconsistencyOutcome {
    pub fn weights(&self) -> &WeightSolution {
        match self {
            InconsistencyOutcome::DisparityBudget(b) => &b.weights,
            InconsistencyOutcome::RankPerturbation { weights, .. } => weights,
            InconsistencyOutcome::ErroneousElicitation(e) => &e.weights,
        }
    }
}

fn dims(profile: &PrProfile) -> (usize, usize, usize) {
    let r = &profile.ranking;
    (r.num_experts(), r.num_attributes(), r.num_alternatives())
}

pub fn default_budget(profile: &PrProfile) -> Result<f64> {
    let table = normalize_utilities(profile)?;
    Ok(0.1 * solve_stage2_closed_form(profile, &table)?.z)
}

/// Smallest big-M that keeps a discarded row slack.
pub fn minimum_big_m(profile: &PrProfile) -> f64 {
    let (ni, nj, nk) = dims(profile);
    2.0 * (ni * nj * nk) as f64
}

/// Maximize `z` with `R U z <= gamma + t s_lo w` and `sum gamma <= budget`.
pub fn solve_with_disparity_budget(profile: &PrProfile, budget: f64) -> Result<BudgetSolution> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(OpaError::InvalidArg(format!("budget {budget} must be finite and nonnegative")));
    }
    let table = normalize_utilities(profile)?;
    let (ni, nj, nk) = dims(profile);
    if budget == 0.0 {
        return Ok(BudgetSolution {
            weights: solve_stage2_closed_form(profile, &table)?,
            slack: vec![vec![vec![0.0; nk]; nj]; ni],
            budget,
        });
    }
    let lp = build_budget_lp(profile, &table, budget);
    let n = ni * nj * nk;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(OpaError::SolverFault(format!("budget program reported {:?}", sol.status)));
    }
    let x = &sol.variable_values;
    Ok(BudgetSolution {
        weights: WeightSolution {
            z: x[0],
            w: unflatten(&x[1..1 + n], ni, nj, nk),
            rank_to_alternative: profile.ranking.rank_to_alternative(),
        },
        slack: unflatten(&x[1 + n..], ni, nj, nk),
        budget,
    })
}

/// Variables: `z`, then `w`, then one slack per row.
pub fn build_budget_lp(profile: &PrProfile, table: &NormalizedUtilityTable, budget: f64) -> LinearProgram {
    let (ni, nj, nk) = dims(profile);
    let n = ni * nj * nk;
    let mut objective = vec![0.0; 1 + 2 * n];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for i in 0..ni {
        for j in 0..nj {
            let ts = profile.ranking.t[i] as f64 * profile.s_lo(i, j);
            for p in 0..nk {
                let k = flat_index(nj, nk, i, j, p);
                lp.add_sparse(&[(0, nk as f64 * table.u[i][j][p]), (1 + k, -ts), (1 + n + k, -1.0)], Relation::Le, 0.0);
            }
        }
    }
    let ones: Vec<(usize, f64)> = (1..=n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    let slack: Vec<(usize, f64)> = (1 + n..1 + 2 * n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&slack, Relation::Le, budget);
    lp
}

/// Evaluates each utility at `r + gamma[i][j][r - 1]` before normalizing.
pub fn perturbed_table(profile: &PrProfile, gamma: &[Vec<Vec<f64>>]) -> Result<NormalizedUtilityTable> {
    let (ni, nj, nk) = dims(profile);
    let shape_ok = gamma.len() == ni && gamma.iter().all(|row| row.len() == nj && row.iter().all(|c| c.len() == nk));
    if !shape_ok {
        return Err(OpaError::InvalidArg(format!("perturbations must be {ni} x {nj} x {nk}")));
    }
    // Domain and shape checks on the utilities themselves.
    normalize_utilities(profile)?;
    let r_max = nk as f64;
    let mut u = vec![vec![Vec::new(); nj]; ni];
    for i in 0..ni {
        for j in 0..nj {
            let mut values = Vec::with_capacity(nk);
            for r in 1..=nk {
                let g = gamma[i][j][r - 1];
                if !(g.abs() < 1.0) {
                    return Err(OpaError::InvalidArg(format!("perturbation {g} must lie in (-1, 1)")));
                }
                let x = r as f64 + g;
                if !(0.0..=r_max).contains(&x) {
                    return Err(OpaError::PerturbedRankOutOfDomain { value: x, max: r_max });
                }
                values.push(profile.utilities[i][j].value_at(x));
            }
            u[i][j] = normalized_row(&values).ok_or(OpaError::ZeroUtilitySum { i, j })?;
        }
    }
    Ok(NormalizedUtilityTable { u })
}

pub fn solve_with_rank_perturbation(
    profile: &PrProfile,
    gamma: &[Vec<Vec<f64>>],
) -> Result<(WeightSolution, NormalizedUtilityTable)> {
    let table = perturbed_table(profile, gamma)?;
    let weights = solve_stage2_closed_form(profile, &table)?;
    Ok((weights, table))
}

fn row_budget(fraction: f64, ranks: usize) -> f64 {
    (fraction * ranks as f64 + 1e-9).floor()
}

/// Variables: `z`, then `w`, then one binary per row.
pub fn build_erroneous_milp(
    profile: &PrProfile,
    table: &NormalizedUtilityTable,
    z_target: f64,
    error_fractions: &[Vec<f64>],
    big_m: f64,
) -> MixedProgram {
    let (ni, nj, nk) = dims(profile);
    let n = ni * nj * nk;
    let mut objective = vec![0.0; 1 + 2 * n];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for i in 0..ni {
        for j in 0..nj {
            let ts = profile.ranking.t[i] as f64 * profile.s_lo(i, j);
            for p in 0..nk {
                let k = flat_index(nj, nk, i, j, p);
                lp.add_sparse(
                    &[(0, nk as f64 * table.u[i][j][p]), (1 + k, -ts), (1 + n + k, -big_m)],
                    Relation::Le,
                    0.0,
                );
            }
            let flags: Vec<(usize, f64)> = (0..nk).map(|p| (1 + n + flat_index(nj, nk, i, j, p), 1.0)).collect();
            lp.add_sparse(&flags, Relation::Le, row_budget(error_fractions[i][j], nk));
        }
    }
    let ones: Vec<(usize, f64)> = (1..=n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    lp.add_sparse(&[(0, 1.0)], Relation::Ge, z_target);
    lp.add_sparse(&[(0, 1.0)], Relation::Le, 1.0);
    MixedProgram::new(lp, (1 + n..1 + 2 * n).collect())
}

pub fn solve_with_erroneous_elicitation(
    profile: &PrProfile,
    z_target: f64,
    error_fractions: &[Vec<f64>],
    big_m: Option<f64>,
) -> Result<ErroneousSolution> {
    let (ni, nj, nk) = dims(profile);
    if error_fractions.len() != ni || error_fractions.iter().any(|row| row.len() != nj) {
        return Err(OpaError::InvalidArg(format!("error fractions must be {ni} x {nj}")));
    }
    if let Some(g) = error_fractions.iter().flatten().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(OpaError::InvalidArg(format!("error fraction {g} must lie in [0, 1]")));
    }
    if !z_target.is_finite() {
        return Err(OpaError::InvalidArg("target disparity must be finite".into()));
    }
    let floor_m = minimum_big_m(profile);
    let big_m = big_m.unwrap_or(floor_m);
    if big_m < floor_m {
        return Err(OpaError::InvalidConfig(format!("big-M {big_m} is below {floor_m}")));
    }
    let table = normalize_utilities(profile)?;
    let milp = build_erroneous_milp(profile, &table, z_target, error_fractions, big_m);
    let sol = solve_milp(&milp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(OpaError::Infeasible(format!("no weights reach disparity {z_target} within the error budgets")))
        }
        other => return Err(OpaError::SolverFault(format!("erroneous-elicitation program reported {other:?}"))),
    }
    let n = ni * nj * nk;
    let x = &sol.variable_values;
    let flags: Vec<f64> = x[1 + n..].iter().map(|v| v.round()).collect();
    Ok(ErroneousSolution {
        weights: WeightSolution {
            z: x[0],
            w: unflatten(&x[1..1 + n], ni, nj, nk),
            rank_to_alternative: profile.ranking.rank_to_alternative(),
        },
        discarded: unflatten(&flags, ni, nj, nk)
            .into_iter()
            .map(|row| row.into_iter().map(|c| c.into_iter().map(|v| v > 0.5).collect()).collect())
            .collect(),
        big_m,
    })
}

pub fn solve_inconsistent(profile: &PrProfile, config: &InconsistencyConfig) -> Result<InconsistencyOutcome> {
    match config {
        InconsistencyConfig::DisparityBudget { budget } => {
            let budget = match budget {
                Some(b) => *b,
                None => default_budget(profile)?,
            };
            solve_with_disparity_budget(profile, budget).map(InconsistencyOutcome::DisparityBudget)
        }
        InconsistencyConfig::RankPerturbation { gamma } => {
            let (weights, table) = solve_with_rank_perturbation(profile, gamma)?;
            Ok(InconsistencyOutcome::RankPerturbation { weights, table })
        }
        InconsistencyConfig::ErroneousElicitation { z_target, error_fractions, big_m } => {
            solve_with_erroneous_elicitation(profile, *z_target, error_fractions, *big_m)
                .map(InconsistencyOutcome::ErroneousElicitation)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opa::RankingProfile;
    use crate::pr::degenerate_intervals;
    use crate::utility::{integer_grid, PiecewiseLinearUtility};

    fn profile(t: Vec<usize>, s: Vec<Vec<usize>>, values: Vec<f64>) -> PrProfile {
        let r = values.len() - 1;
        let ranking = RankingProfile::with_identity_alternatives(t, s, r).unwrap();
        let iv = degenerate_intervals(&ranking);
        let u = PiecewiseLinearUtility::from_values(integer_grid(r), values).unwrap();
        PrProfile::uniform(ranking, iv, u).unwrap()
    }

    #[test]
    fn toy_budget() {
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 1.0]);
        let sol = solve_with_disparity_budget(&p, 0.5).unwrap();
        assert!((sol.weights.z - 1.5).abs() < 1e-9);
        assert!((sol.slack[0][0][0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_is_stage2() {
        let p = profile(vec![2, 1], vec![vec![1, 2], vec![2, 1]], vec![0.0, 0.5, 0.8, 1.0]);
        let table = normalize_utilities(&p).unwrap();
        let cf = solve_stage2_closed_form(&p, &table).unwrap();
        assert_eq!(solve_with_disparity_budget(&p, 0.0).unwrap().weights, cf);
        let lp = solve_lp(&build_budget_lp(&p, &table, 0.0)).unwrap();
        assert!((lp.variable_values[0] - cf.z).abs() < 1e-9);
        assert!((default_budget(&p).unwrap() - 0.1 * cf.z).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_bit_matches() {
        let p = profile(vec![1, 2], vec![vec![2, 1], vec![1, 2]], vec![0.0, 0.5, 0.8, 1.0]);
        let (w, t) = solve_with_rank_perturbation(&p, &vec![vec![vec![0.0; 3]; 2]; 2]).unwrap();
        let table = normalize_utilities(&p).unwrap();
        assert_eq!(t, table);
        assert_eq!(w, solve_stage2_closed_form(&p, &table).unwrap());
    }

    #[test]
    fn half_step_perturbation() {
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 0.5, 1.0]);
        let (_, t) = solve_with_rank_perturbation(&p, &[vec![vec![-0.5, -0.5]]]).unwrap();
        // u(0.5) = 0.25 and u(1.5) = 0.75.
        assert!((t.u[0][0][0] - 0.75).abs() < 1e-15);
        assert!((t.u[0][0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perturbation_guards() {
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 0.5, 1.0]);
        let err = solve_with_rank_perturbation(&p, &[vec![vec![0.0, 0.5]]]).unwrap_err();
        assert_eq!(err.code(), "PERTURBED_RANK_OUT_OF_DOMAIN");
        assert_eq!(solve_with_rank_perturbation(&p, &[vec![vec![0.0, 1.0]]]).unwrap_err().code(), "INVALID_ARG");
        let one = profile(vec![1], vec![vec![1]], vec![0.0, 1.0]);
        let err = solve_with_rank_perturbation(&one, &[vec![vec![-0.999]]]).unwrap();
        assert!(err.0.z.is_finite());
        let flat = profile(vec![1], vec![vec![1]], vec![0.0, 1.0]);
        let mut zero = flat.clone();
        zero.utilities[0][0] = PiecewiseLinearUtility::from_values(integer_grid(1), vec![0.0, 0.0]).unwrap();
        assert_eq!(solve_with_rank_perturbation(&zero, &[vec![vec![0.0]]]).unwrap_err().code(), "ZERO_UTILITY_SUM");
    }

    #[test]
    fn corrupted_row_is_discarded() {
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 0.5, 0.8, 1.0]);
        let sol = solve_with_erroneous_elicitation(&p, 0.0, &[vec![1.0 / 3.0]], None).unwrap();
        assert_eq!(sol.discarded[0][0], vec![true, false, false]);
        // Dropping the top row leaves U = (0.8 + 0.5) / 2.3 on the remaining weights.
        assert!((sol.weights.z - 2.3 / 3.9).abs() < 1e-9);
    }

    #[test]
    fn zero_fractions_keep_every_row() {
        let p = profile(vec![2, 1], vec![vec![1, 2], vec![2, 1]], vec![0.0, 0.6, 0.9, 1.0]);
        let sol = solve_with_erroneous_elicitation(&p, 0.0, &[vec![0.0; 2], vec![0.0; 2]], None).unwrap();
        assert!(sol.discarded.iter().flatten().flatten().all(|f| !f));
        let table = normalize_utilities(&p).unwrap();
        assert!((sol.weights.z - solve_stage2_closed_form(&p, &table).unwrap().z).abs() < 1e-9);
    }

    #[test]
    fn unreachable_target() {
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 0.5, 1.0]);
        let err = solve_with_erroneous_elicitation(&p, 1.5, &[vec![1.0]], None).unwrap_err();
        assert_eq!(err.code(), "INFEASIBLE");
        let err = solve_with_erroneous_elicitation(&p, 0.0, &[vec![0.0]], Some(1.0)).unwrap_err();
        assert_eq!(err.code(), "INVALID_CONFIG");
    }

    #[test]
    fn config_round_trip() {
        let cfg =
            InconsistencyConfig::ErroneousElicitation { z_target: 0.2, error_fractions: vec![vec![0.5]], big_m: None };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"mode\":\"ERRONEOUS_ELICITATION\""));
        assert_eq!(serde_json::from_str::<InconsistencyConfig>(&json).unwrap(), cfg);
        let p = profile(vec![1], vec![vec![1]], vec![0.0, 0.5, 1.0]);
        let out = solve_inconsistent(&p, &InconsistencyConfig::DisparityBudget { budget: None }).unwrap();
        assert!(out.weights().z > 0.0);
    }
}
