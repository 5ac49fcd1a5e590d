//! Classical Ordinal Priority Approach.

use opa_lp::{solve_lp, LinearProgram, Relation};
use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};

/// Ordinal input of one OPA instance.
///
/// `t[i]` is the rank of expert `i`, `s[i][j]` the rank expert `i` gives
/// attribute `j`, and `r[i][j][k]` the rank of alternative `k` under that
/// expert and attribute. All ranks are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingProfile {
    pub t: Vec<usize>,
    pub s: Vec<Vec<usize>>,
    pub r: Vec<Vec<Vec<usize>>>,
}

impl RankingProfile {
    pub fn new(t: Vec<usize>, s: Vec<Vec<usize>>, r: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let profile = RankingProfile { t, s, r };
        profile.validate()?;
        Ok(profile)
    }

    /// Profile where every (expert, attribute) pair ranks alternative `k` at position `k + 1`.
    pub fn with_identity_alternatives(t: Vec<usize>, s: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        let r = s.iter().map(|row| row.iter().map(|_| (1..=k).collect()).collect()).collect();
        Self::new(t, s, r)
    }

    pub fn num_experts(&self) -> usize {
        self.t.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.s.first().map_or(0, Vec::len)
    }

    pub fn num_alternatives(&self) -> usize {
        self.r.first().and_then(|row| row.first()).map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (ni, nj, nk) = (self.num_experts(), self.num_attributes(), self.num_alternatives());
        if ni == 0 || nj == 0 || nk == 0 {
            return Err(OpaError::InvalidProfile("experts, attributes and alternatives must be non-empty".into()));
        }
        if self.s.len() != ni || self.r.len() != ni {
            return Err(OpaError::InvalidProfile("s and r need one row per expert".into()));
        }
        check_bijection(&self.t, ni).map_err(|msg| OpaError::InvalidProfile(format!("t: {msg}")))?;
        for i in 0..ni {
            if self.s[i].len() != nj || self.r[i].len() != nj {
                return Err(OpaError::InvalidProfile(format!("expert {i} must rank {nj} attributes")));
            }
            check_bijection(&self.s[i], nj).map_err(|msg| OpaError::InvalidProfile(format!("s[{i}]: {msg}")))?;
            for j in 0..nj {
                check_bijection(&self.r[i][j], nk)
                    .map_err(|msg| OpaError::InvalidProfile(format!("r[{i}][{j}]: {msg}")))?;
            }
        }
        Ok(())
    }

    /// `result[i][j][p]` is the alternative placed at position `p + 1`.
    pub fn rank_to_alternative(&self) -> Vec<Vec<Vec<usize>>> {
        self.r
            .iter()
            .map(|row| {
                row.iter()
                    .map(|ranks| {
                        let mut inverse = vec![0; ranks.len()];
                        for (k, &pos) in ranks.iter().enumerate() {
                            inverse[pos - 1] = k;
                        }
                        inverse
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_bijection(ranks: &[usize], k: usize) -> std::result::Result<(), String> {
    if ranks.len() != k {
        return Err(format!("expected {k} ranks, found {}", ranks.len()));
    }
    let mut seen = vec![false; k];
    for &p in ranks {
        if !(1..=k).contains(&p) {
            return Err(format!("rank {p} is outside 1..={k}"));
        }
        if std::mem::replace(&mut seen[p - 1], true) {
            return Err(format!("rank {p} appears twice; ties are not supported"));
        }
    }
    Ok(())
}

/// Optimal disparity and weights by rank position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub z: f64,
    /// `w[i][j][p]` is the weight at rank position `p + 1`.
    pub w: Vec<Vec<Vec<f64>>>,
    pub rank_to_alternative: Vec<Vec<Vec<usize>>>,
}

impl WeightSolution {
    /// Weight of alternative `k` under expert `i` and attribute `j`.
    pub fn weight_of_alternative(&self, i: usize, j: usize, k: usize) -> f64 {
        let pos = self.rank_to_alternative[i][j].iter().position(|&a| a == k).expect("alternative index in range");
        self.w[i][j][pos]
    }

    pub fn total(&self) -> f64 {
        self.w.iter().flatten().flatten().sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.w.iter().flatten().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub expert: Vec<f64>,
    pub attribute: Vec<f64>,
    pub alternative: Vec<f64>,
}

/// `tail[r] = sum_{h=r+1}^{n} 1/h`, accumulated from the small end.
pub fn tail_harmonic(n: usize) -> Vec<f64> {
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for h in (1..=n).rev() {
        acc += 1.0 / h as f64;
        tail[h - 1] = acc;
    }
    tail
}

/// `H_n = sum_{h=1}^{n} 1/h`.
pub fn harmonic(n: usize) -> f64 {
    tail_harmonic(n).first().copied().unwrap_or(0.0)
}

/// Flat index of `w[i][j][p]` among `J * K`-sized expert blocks.
pub(crate) fn flat_index(nj: usize, nk: usize, i: usize, j: usize, p: usize) -> usize {
    (i * nj + j) * nk + p
}

pub(crate) fn unflatten(values: &[f64], ni: usize, nj: usize, nk: usize) -> Vec<Vec<Vec<f64>>> {
    (0..ni).map(|i| (0..nj).map(|j| values[flat_index(nj, nk, i, j, 0)..][..nk].to_vec()).collect()).collect()
}

/// Maximize `z` subject to `(sum_{h=r}^{K} 1/h) z <= t_i s_ij w_ijr`, `sum w = 1`.
///
/// Variable 0 is `z`; `w[i][j][p]` follows at `1 + flat_index(..)`.
pub fn build_opa_lp(profile: &RankingProfile) -> Result<LinearProgram> {
    profile.validate()?;
    let (ni, nj, nk) = (profile.num_experts(), profile.num_attributes(), profile.num_alternatives());
    let n = 1 + ni * nj * nk;
    let mut objective = vec![0.0; n];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    let tail = tail_harmonic(nk);
    for i in 0..ni {
        for j in 0..nj {
            let ts = (profile.t[i] * profile.s[i][j]) as f64;
            for (p, &h) in tail.iter().enumerate() {
                lp.add_sparse(&[(0, h), (1 + flat_index(nj, nk, i, j, p), -ts)], Relation::Le, 0.0);
            }
        }
    }
    let ones: Vec<(usize, f64)> = (1..n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    Ok(lp)
}

pub fn solve_opa_lp(profile: &RankingProfile) -> Result<WeightSolution> {
    let lp = build_opa_lp(profile)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(OpaError::SolverFault(format!("OPA program reported {:?}", sol.status)));
    }
    let (ni, nj, nk) = (profile.num_experts(), profile.num_attributes(), profile.num_alternatives());
    Ok(WeightSolution {
        z: sol.variable_values[0],
        w: unflatten(&sol.variable_values[1..], ni, nj, nk),
        rank_to_alternative: profile.rank_to_alternative(),
    })
}

pub fn solve_opa_closed_form(profile: &RankingProfile) -> Result<WeightSolution> {
    profile.validate()?;
    let (ni, nj, nk) = (profile.num_experts(), profile.num_attributes(), profile.num_alternatives());
    let tail = tail_harmonic(nk);
    let denom = nk as f64 * harmonic(ni) * harmonic(nj);
    let w = (0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| {
                    let ts = (profile.t[i] * profile.s[i][j]) as f64;
                    tail.iter().map(|h| h / (ts * denom)).collect()
                })
                .collect()
        })
        .collect();
    Ok(WeightSolution { z: 1.0 / denom, w, rank_to_alternative: profile.rank_to_alternative() })
}

pub fn aggregate_weights(solution: &WeightSolution) -> GroupWeights {
    let ni = solution.w.len();
    let nj = solution.w.first().map_or(0, Vec::len);
    let nk = solution.w.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut expert = vec![0.0; ni];
    let mut attribute = vec![0.0; nj];
    let mut alternative = vec![0.0; nk];
    for i in 0..ni {
        for j in 0..nj {
            for p in 0..nk {
                let w = solution.w[i][j][p];
                expert[i] += w;
                attribute[j] += w;
                alternative[solution.rank_to_alternative[i][j][p]] += w;
            }
        }
    }
    GroupWeights { expert, attribute, alternative }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateKind {
    /// Rank order centroid.
    Roc,
    /// Rank reciprocal.
    Rr,
}

pub fn surrogate_weights(n: usize, kind: SurrogateKind) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(OpaError::InvalidArg("surrogate weights need n >= 1".into()));
    }
    Ok(match kind {
        SurrogateKind::Roc => tail_harmonic(n).into_iter().map(|h| h / n as f64).collect(),
        SurrogateKind::Rr => {
            let h = harmonic(n);
            (1..=n).map(|l| 1.0 / (l as f64 * h)).collect()
        }
    })
}

/// OPA weights as the product `v_t^RR * v_s^RR * v_r^ROC`.
pub fn factorized_weights(profile: &RankingProfile) -> Result<WeightSolution> {
    profile.validate()?;
    let (ni, nj, nk) = (profile.num_experts(), profile.num_attributes(), profile.num_alternatives());
    let rr_t = surrogate_weights(ni, SurrogateKind::Rr)?;
    let rr_s = surrogate_weights(nj, SurrogateKind::Rr)?;
    let roc = surrogate_weights(nk, SurrogateKind::Roc)?;
    let w = (0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| {
                    let f = rr_t[profile.t[i] - 1] * rr_s[profile.s[i][j] - 1];
                    roc.iter().map(|v| f * v).collect()
                })
                .collect()
        })
        .collect();
    Ok(WeightSolution {
        z: 1.0 / (nk as f64 * harmonic(ni) * harmonic(nj)),
        w,
        rank_to_alternative: profile.rank_to_alternative(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn three_alternatives_single_expert() {
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1]], 3).unwrap();
        let cf = solve_opa_closed_form(&p).unwrap();
        assert!((cf.z - 1.0 / 3.0).abs() < 1e-15);
        assert!(close(&cf.flat(), &[11.0 / 18.0, 5.0 / 18.0, 1.0 / 9.0], 1e-15));
        let lp = solve_opa_lp(&p).unwrap();
        assert!((lp.z - cf.z).abs() < 1e-9);
        assert!(close(&lp.flat(), &cf.flat(), 1e-9));
    }

    #[test]
    fn two_experts_two_alternatives() {
        let p = RankingProfile::with_identity_alternatives(vec![1, 2], vec![vec![1], vec![1]], 2).unwrap();
        let cf = solve_opa_closed_form(&p).unwrap();
        assert!((cf.z - 1.0 / 3.0).abs() < 1e-15);
        assert!(close(&cf.flat(), &[0.5, 1.0 / 6.0, 0.25, 1.0 / 12.0], 1e-15));
        let g = aggregate_weights(&cf);
        assert!(close(&g.expert, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        assert!((solve_opa_lp(&p).unwrap().z - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_alternative_lp_shape() {
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1]], 2).unwrap();
        let lp = build_opa_lp(&p).unwrap();
        assert_eq!(lp.num_vars(), 3);
        assert_eq!(lp.constraints.len(), 3);
        assert_eq!(lp.constraints.iter().filter(|c| c.relation == Relation::Eq).count(), 1);
        assert!((solve_opa_lp(&p).unwrap().z - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_everything() {
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1]], 1).unwrap();
        let cf = solve_opa_closed_form(&p).unwrap();
        assert_eq!(cf.z, 1.0);
        assert_eq!(cf.flat(), vec![1.0]);
        let g = aggregate_weights(&cf);
        assert_eq!((g.expert, g.attribute, g.alternative), (vec![1.0], vec![1.0], vec![1.0]));
        assert_eq!(factorized_weights(&p).unwrap().flat(), vec![1.0]);
    }

    #[test]
    fn attribute_aggregates() {
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1, 2]], 1).unwrap();
        let g = aggregate_weights(&solve_opa_closed_form(&p).unwrap());
        assert!(close(&g.attribute, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn alternatives_are_routed_by_rank() {
        let p = RankingProfile::new(vec![1], vec![vec![1]], vec![vec![vec![3, 1, 2]]]).unwrap();
        let sol = solve_opa_closed_form(&p).unwrap();
        assert_eq!(sol.rank_to_alternative[0][0], vec![1, 2, 0]);
        let g = aggregate_weights(&sol);
        assert!(close(&g.alternative, &[1.0 / 9.0, 11.0 / 18.0, 5.0 / 18.0], 1e-15));
        assert_eq!(sol.weight_of_alternative(0, 0, 1), sol.w[0][0][0]);
    }

    #[test]
    fn surrogates() {
        assert!(close(
            &surrogate_weights(3, SurrogateKind::Roc).unwrap(),
            &[11.0 / 18.0, 5.0 / 18.0, 2.0 / 18.0],
            1e-15
        ));
        assert!(close(&surrogate_weights(2, SurrogateKind::Rr).unwrap(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        assert_eq!(surrogate_weights(1, SurrogateKind::Roc).unwrap(), vec![1.0]);
        assert_eq!(surrogate_weights(1, SurrogateKind::Rr).unwrap(), vec![1.0]);
        assert_eq!(surrogate_weights(0, SurrogateKind::Rr).unwrap_err().code(), "INVALID_ARG");
    }

    #[test]
    fn factorization_cases() {
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1]], 3).unwrap();
        assert!(close(&factorized_weights(&p).unwrap().flat(), &[11.0 / 18.0, 5.0 / 18.0, 1.0 / 9.0], 1e-15));
        let p = RankingProfile::with_identity_alternatives(vec![1, 2], vec![vec![1], vec![1]], 1).unwrap();
        assert!(close(&factorized_weights(&p).unwrap().flat(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn ties_and_ranges_rejected() {
        let tie = RankingProfile::new(vec![1], vec![vec![1]], vec![vec![vec![1, 1]]]);
        assert_eq!(tie.unwrap_err().code(), "INVALID_PROFILE");
        let bad_t = RankingProfile::with_identity_alternatives(vec![3], vec![vec![1]], 2);
        assert_eq!(bad_t.unwrap_err().code(), "INVALID_PROFILE");
        let ragged = RankingProfile::new(vec![1, 1], vec![vec![1], vec![1, 2]], vec![vec![vec![1]], vec![vec![1]]]);
        assert!(ragged.is_err());
    }

    #[test]
    fn expert_and_attribute_ranks_must_be_strict() {
        let p = RankingProfile::with_identity_alternatives(vec![1, 1], vec![vec![1], vec![1]], 2);
        assert_eq!(p.unwrap_err().code(), "INVALID_PROFILE");
        let p = RankingProfile::with_identity_alternatives(vec![1], vec![vec![1, 1]], 2);
        assert_eq!(p.unwrap_err().code(), "INVALID_PROFILE");
        let p = RankingProfile::with_identity_alternatives(vec![2, 1], vec![vec![2, 1], vec![1, 2]], 2).unwrap();
        assert!((solve_opa_closed_form(&p).unwrap().total() - 1.0).abs() < 1e-12);
    }
}
