//! Bundled reference matrix and published rankings.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::matrix::{DecisionMatrix, RankingVector};

pub const TABLE1_JSON: &str = include_str!("../fixtures/table1.json");
pub const TABLE2_JSON: &str = include_str!("../fixtures/table2.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFixture {
    pub version: u32,
    pub attributes: Vec<String>,
    pub alternatives: Vec<String>,
    /// `values[attribute][alternative]`.
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl MatrixFixture {
    /// Equal attribute weights unless the fixture lists its own.
    pub fn to_matrix(&self) -> Result<DecisionMatrix> {
        let mut m = match &self.weights {
            Some(w) => DecisionMatrix::new(self.values.clone(), w.clone())?,
            None => DecisionMatrix::with_equal_weights(self.values.clone())?,
        };
        m.attributes = self.attributes.clone();
        m.alternatives = self.alternatives.clone();
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRanking {
    pub method: String,
    pub ranks: RankingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingFixture {
    pub version: u32,
    pub alternatives: Vec<String>,
    pub rankings: Vec<PublishedRanking>,
}

impl RankingFixture {
    pub fn get(&self, method: &str) -> Option<&RankingVector> {
        self.rankings.iter().find(|r| r.method == method).map(|r| &r.ranks)
    }

    pub fn named(&self) -> Vec<(String, RankingVector)> {
        self.rankings.iter().map(|r| (r.method.clone(), r.ranks.clone())).collect()
    }
}

pub fn parse_matrix(json: &str) -> Result<MatrixFixture> {
    Ok(serde_json::from_str(json)?)
}

pub fn reference_matrix() -> Result<DecisionMatrix> {
    parse_matrix(TABLE1_JSON)?.to_matrix()
}

pub fn published_rankings() -> Result<RankingFixture> {
    let fx: RankingFixture = serde_json::from_str(TABLE2_JSON)?;
    for r in &fx.rankings {
        if r.ranks.len() != fx.alternatives.len() {
            return Err(BenchError::LengthMismatch { left: r.ranks.len(), right: fx.alternatives.len() });
        }
    }
    Ok(fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_load() {
        let m = reference_matrix().unwrap();
        assert_eq!((m.num_attributes(), m.num_alternatives()), (6, 10));
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let r = published_rankings().unwrap();
        assert_eq!(r.rankings.len(), 10);
        assert_eq!(r.get("TOPSIS").unwrap().ranks, vec![10, 4, 6, 8, 1, 5, 7, 2, 3, 9]);
    }
}
