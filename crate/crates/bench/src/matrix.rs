use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

const TIE_TOL: f64 = 1e-12;

/// Benefit-type scores `values[attribute][alternative]` with attribute weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub alternatives: Vec<String>,
}

impl DecisionMatrix {
    pub fn new(values: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = DecisionMatrix { values, weights, attributes: Vec::new(), alternatives: Vec::new() };
        m.validate()?;
        Ok(m)
    }

    pub fn with_equal_weights(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len().max(1);
        Self::new(values, vec![1.0 / n as f64; n])
    }

    pub fn num_attributes(&self) -> usize {
        self.values.len()
    }

    pub fn num_alternatives(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_alternatives();
        if self.values.is_empty() || k == 0 {
            return Err(BenchError::InvalidMatrix("need at least one attribute and one alternative".into()));
        }
        if self.values.iter().any(|row| row.len() != k) {
            return Err(BenchError::InvalidMatrix("rows differ in length".into()));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(BenchError::InvalidMatrix("scores must be finite and nonnegative".into()));
        }
        if self.weights.len() != self.values.len() {
            return Err(BenchError::LengthMismatch { left: self.weights.len(), right: self.values.len() });
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(BenchError::InvalidMatrix("weights must be nonnegative and sum to 1".into()));
        }
        for (names, n, what) in
            [(&self.attributes, self.values.len(), "attribute"), (&self.alternatives, k, "alternative")]
        {
            if !names.is_empty() && names.len() != n {
                return Err(BenchError::InvalidMatrix(format!("need {n} {what} names")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().flatten().for_each(|v| *v *= c);
        m
    }

    /// Column-wise vector normalization `x / ||x||_2`.
    pub(crate) fn vector_normalized(&self) -> Result<Vec<Vec<f64>>> {
        self.values
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(BenchError::Normalization(j));
                }
                Ok(row.iter().map(|v| v / norm).collect())
            })
            .collect()
    }
}

/// Rank per alternative, 1 = best; tied alternatives share a rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankingVector {
    pub ranks: Vec<usize>,
}

impl RankingVector {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        if ranks.iter().any(|&r| r == 0 || r > n) {
            return Err(BenchError::InvalidArg(format!("ranks must lie in 1..={n}")));
        }
        Ok(RankingVector { ranks })
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn has_ties(&self) -> bool {
        let mut sorted = self.ranks.clone();
        sorted.sort_unstable();
        sorted.windows(2).any(|w| w[0] == w[1])
    }

    /// Dense ranks of `scores`; the best score gets rank 1.
    pub fn from_scores(scores: &[f64], higher_is_better: bool) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            let ord = scores[a].total_cmp(&scores[b]);
            if higher_is_better {
                ord.reverse()
            } else {
                ord
            }
        });
        let mut ranks = vec![0; scores.len()];
        let mut rank = 0;
        let mut prev: Option<f64> = None;
        for &k in &order {
            let s = scores[k];
            let tied = prev.is_some_and(|p| (p - s).abs() <= TIE_TOL * p.abs().max(s.abs()).max(1.0));
            if !tied {
                rank += 1;
            }
            ranks[k] = rank;
            prev = Some(s);
        }
        RankingVector { ranks }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_ranks() {
        let r = RankingVector::from_scores(&[0.3, 0.9, 0.3, 0.1], true);
        assert_eq!(r.ranks, vec![2, 1, 2, 3]);
        assert!(r.has_ties());
        let r = RankingVector::from_scores(&[0.3, 0.9, 0.1], false);
        assert_eq!(r.ranks, vec![2, 3, 1]);
        assert!(!r.has_ties());
    }

    #[test]
    fn matrix_validation() {
        assert!(DecisionMatrix::with_equal_weights(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(DecisionMatrix::with_equal_weights(vec![vec![-1.0, 2.0]]).is_err());
        assert!(DecisionMatrix::new(vec![vec![1.0, 2.0]], vec![0.5]).is_err());
        let m = DecisionMatrix::with_equal_weights(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.weights, vec![0.5, 0.5]);
        let zero = DecisionMatrix::with_equal_weights(vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(zero.vector_normalized().unwrap_err().code(), "NORMALIZATION_ERROR");
    }
}
