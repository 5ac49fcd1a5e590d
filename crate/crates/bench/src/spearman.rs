use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::matrix::RankingVector;

/// Fractional ranks in ascending order; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            out[k] = avg;
        }
        start = end;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(BenchError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(a: &RankingVector, b: &RankingVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(BenchError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(BenchError::InsufficientSamples { needed: 2, got: n });
    }
    let to_f = |r: &RankingVector| r.ranks.iter().map(|&v| v as f64).collect::<Vec<_>>();
    let (ra, rb) = (average_ranks(&to_f(a)), average_ranks(&to_f(b)));
    if a.has_ties() || b.has_ties() {
        return pearson(&ra, &rb);
    }
    let d2: u64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| {
            let d = (*x as i64 - *y as i64).unsigned_abs();
            d * d
        })
        .sum();
    let n = n as u64;
    Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64)
}

/// Pairwise Spearman coefficients between named rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub methods: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }
}

pub fn spearman_heatmap(rankings: &[(String, RankingVector)]) -> Result<Heatmap> {
    let mut values = vec![vec![0.0; rankings.len()]; rankings.len()];
    for i in 0..rankings.len() {
        for j in i..rankings.len() {
            let rho = spearman(&rankings[i].1, &rankings[j].1)?;
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(Heatmap { methods: rankings.iter().map(|(m, _)| m.clone()).collect(), values })
}
