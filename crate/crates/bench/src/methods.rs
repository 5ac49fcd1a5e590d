//! Ranking methods behind a common trait, looked up by name in a registry.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::matrix::{DecisionMatrix, RankingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub method: String,
    pub scores: Vec<f64>,
    pub higher_is_better: bool,
    pub ranking: RankingVector,
    pub ties: bool,
    /// Intermediate per-alternative quantities, e.g. VIKOR's `S`, `R` and `Q`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<(String, Vec<f64>)>,
}

impl MethodOutput {
    fn from_scores(method: &str, scores: Vec<f64>, higher_is_better: bool) -> Self {
        let ranking = RankingVector::from_scores(&scores, higher_is_better);
        MethodOutput {
            method: method.to_string(),
            ties: ranking.has_ties(),
            scores,
            higher_is_better,
            ranking,
            details: Vec::new(),
        }
    }
}

pub trait RankingMethod: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, matrix: &DecisionMatrix) -> Result<MethodOutput>;
}

/// Closeness to the ideal solution with vector normalization and Euclidean distances.
#[derive(Debug, Clone, Copy, Default)]
pub struct Topsis;

impl RankingMethod for Topsis {
    fn name(&self) -> &str {
        "TOPSIS"
    }

    fn evaluate(&self, matrix: &DecisionMatrix) -> Result<MethodOutput> {
        matrix.validate()?;
        let norm = matrix.vector_normalized()?;
        let k = matrix.num_alternatives();
        let weighted: Vec<Vec<f64>> =
            norm.iter().zip(&matrix.weights).map(|(row, w)| row.iter().map(|v| w * v).collect()).collect();
        let ideal: Vec<f64> = weighted.iter().map(|row| row.iter().copied().fold(f64::MIN, f64::max)).collect();
        let anti: Vec<f64> = weighted.iter().map(|row| row.iter().copied().fold(f64::MAX, f64::min)).collect();
        let scores = (0..k)
            .map(|a| {
                let dist = |target: &[f64]| {
                    weighted.iter().zip(target).map(|(row, t)| (row[a] - t).powi(2)).sum::<f64>().sqrt()
                };
                let (plus, minus) = (dist(&ideal), dist(&anti));
                if plus + minus == 0.0 {
                    0.5
                } else {
                    minus / (plus + minus)
                }
            })
            .collect();
        Ok(MethodOutput::from_scores(self.name(), scores, true))
    }
}

/// Ratio system: weighted sum of vector-normalized benefit scores.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moora;

impl RankingMethod for Moora {
    fn name(&self) -> &str {
        "MOORA"
    }

    fn evaluate(&self, matrix: &DecisionMatrix) -> Result<MethodOutput> {
        matrix.validate()?;
        let norm = matrix.vector_normalized()?;
        let scores = (0..matrix.num_alternatives())
            .map(|a| norm.iter().zip(&matrix.weights).map(|(row, w)| w * row[a]).sum())
            .collect();
        Ok(MethodOutput::from_scores(self.name(), scores, true))
    }
}

/// Compromise ranking by `Q`, mixing group utility `S` and individual regret `R` with weight `v`.
#[derive(Debug, Clone, Copy)]
pub struct Vikor {
    pub v: f64,
}

impl Default for Vikor {
    fn default() -> Self {
        Vikor { v: 0.5 }
    }
}

/// Spreads at rounding level count as zero so ties in exact arithmetic stay ties.
fn spread_ratio(x: f64, best: f64, worst: f64) -> f64 {
    if worst - best <= 1e-12 * best.abs().max(worst.abs()) {
        0.0
    } else {
        (x - best) / (worst - best)
    }
}

impl RankingMethod for Vikor {
    fn name(&self) -> &str {
        "VIKOR"
    }

    fn evaluate(&self, matrix: &DecisionMatrix) -> Result<MethodOutput> {
        matrix.validate()?;
        if !(0.0..=1.0).contains(&self.v) {
            return Err(BenchError::InvalidArg(format!("v = {} outside [0, 1]", self.v)));
        }
        let k = matrix.num_alternatives();
        let mut s = vec![0.0; k];
        let mut r = vec![0.0_f64; k];
        for (j, (row, w)) in matrix.values.iter().zip(&matrix.weights).enumerate() {
            let best = row.iter().copied().fold(f64::MIN, f64::max);
            let worst = row.iter().copied().fold(f64::MAX, f64::min);
            if best == worst {
                log::warn!("VIKOR: attribute {j} has no spread and is skipped");
                continue;
            }
            for a in 0..k {
                let d = w * ((best - row[a]) / (best - worst));
                s[a] += d;
                r[a] = r[a].max(d);
            }
        }
        let fold = |x: &[f64]| {
            let lo = x.iter().copied().fold(f64::MAX, f64::min);
            let hi = x.iter().copied().fold(f64::MIN, f64::max);
            (lo, hi)
        };
        let ((s_best, s_worst), (r_best, r_worst)) = (fold(&s), fold(&r));
        let q: Vec<f64> = (0..k)
            .map(|a| {
                self.v * spread_ratio(s[a], s_best, s_worst) + (1.0 - self.v) * spread_ratio(r[a], r_best, r_worst)
            })
            .collect();
        let mut out = MethodOutput::from_scores(self.name(), q.clone(), false);
        out.details = vec![("S".into(), s), ("R".into(), r), ("Q".into(), q)];
        Ok(out)
    }
}

pub struct MethodRegistry {
    methods: Vec<Box<dyn RankingMethod>>,
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut reg = MethodRegistry::new();
        reg.register(Box::new(Topsis)).expect("fresh registry");
        reg.register(Box::new(Vikor::default())).expect("fresh registry");
        reg.register(Box::new(Moora)).expect("fresh registry");
        reg
    }
}

impl MethodRegistry {
    pub fn new() -> Self {
        MethodRegistry { methods: Vec::new() }
    }

    pub fn register(&mut self, method: Box<dyn RankingMethod>) -> Result<()> {
        if self.get(method.name()).is_some() {
            return Err(BenchError::InvalidArg(format!("method `{}` already registered", method.name())));
        }
        self.methods.push(method);
        Ok(())
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&dyn RankingMethod> {
        self.methods.iter().find(|m| m.name().eq_ignore_ascii_case(name)).map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.name()).collect()
    }

    pub fn evaluate(&self, name: &str, matrix: &DecisionMatrix) -> Result<MethodOutput> {
        self.get(name).ok_or_else(|| BenchError::UnknownMethod(name.to_string()))?.evaluate(matrix)
    }

    pub fn evaluate_all(&self, matrix: &DecisionMatrix) -> Result<Vec<MethodOutput>> {
        self.methods.iter().map(|m| m.evaluate(matrix)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(values: Vec<Vec<f64>>) -> DecisionMatrix {
        DecisionMatrix::with_equal_weights(values).unwrap()
    }

    #[test]
    fn identical_alternatives_tie() {
        let mat = m(vec![vec![1.0, 2.0, 1.0], vec![3.0, 1.0, 3.0]]);
        for out in MethodRegistry::default().evaluate_all(&mat).unwrap() {
            assert_eq!(out.ranking.ranks[0], out.ranking.ranks[2], "{}", out.method);
            assert!(out.ties);
        }
    }

    #[test]
    fn single_alternative() {
        let mat = m(vec![vec![2.0], vec![5.0]]);
        for out in MethodRegistry::default().evaluate_all(&mat).unwrap() {
            assert_eq!(out.ranking.ranks, vec![1]);
        }
    }

    #[test]
    fn moora_single_attribute_follows_column() {
        let out = Moora.evaluate(&m(vec![vec![0.2, 0.9, 0.5]])).unwrap();
        assert_eq!(out.ranking.ranks, vec![3, 1, 2]);
    }

    #[test]
    fn topsis_hand_example() {
        // Normalized columns (0.6, 0.8) and (0.8, 0.6); distances mirror each other.
        let out = Topsis.evaluate(&m(vec![vec![3.0, 4.0], vec![4.0, 3.0]])).unwrap();
        assert!((out.scores[0] - 0.5).abs() < 1e-12 && (out.scores[1] - 0.5).abs() < 1e-12);
        let out = Topsis.evaluate(&m(vec![vec![3.0, 4.0], vec![3.0, 4.0]])).unwrap();
        assert_eq!(out.scores, vec![0.0, 1.0]);
    }

    #[test]
    fn vikor_all_equal() {
        let out = Vikor::default().evaluate(&m(vec![vec![1.0; 4], vec![2.0; 4]])).unwrap();
        assert_eq!(out.ranking.ranks, vec![1; 4]);
    }

    #[test]
    fn vikor_extremes_follow_s_and_r() {
        // d = (0, 1), (1, 0), (0.6, 0.6): S = (.5, .5, .6), R = (.5, .5, .3).
        let mat = m(vec![vec![1.0, 0.0, 0.4], vec![0.0, 1.0, 0.4]]);
        let s_only = Vikor { v: 1.0 }.evaluate(&mat).unwrap();
        assert_eq!(s_only.ranking.ranks, vec![1, 1, 2]);
        let r_only = Vikor { v: 0.0 }.evaluate(&mat).unwrap();
        assert_eq!(r_only.ranking.ranks, vec![2, 2, 1]);
        assert_eq!(s_only.details[0].0, "S");
    }

    #[test]
    fn registry_lookup() {
        let reg = MethodRegistry::default();
        assert_eq!(reg.names(), vec!["TOPSIS", "VIKOR", "MOORA"]);
        assert!(reg.get("topsis").is_some());
        let mat = m(vec![vec![1.0, 2.0]]);
        assert_eq!(reg.evaluate("maut", &mat).unwrap_err().code(), "UNKNOWN_METHOD");
        let mut reg = reg;
        assert!(reg.register(Box::new(Moora)).is_err());
    }
}
