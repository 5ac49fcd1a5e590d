use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Population moments of a sample. Kurtosis is excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub mean: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub coefficient_of_variation: f64,
    pub min: f64,
    pub max: f64,
}

impl StatsRow {
    /// Row for a single observation: every shape statistic is zero.
    pub fn single(value: f64) -> Self {
        StatsRow { mean: value, skewness: 0.0, kurtosis: 0.0, coefficient_of_variation: 0.0, min: value, max: value }
    }
}

pub fn descriptive_stats(samples: &[f64]) -> Result<StatsRow> {
    let n = samples.len();
    if n < 2 {
        return Err(BenchError::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    if mean == 0.0 {
        return Err(BenchError::ZeroMean);
    }
    let moment = |k: i32| samples.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / nf;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));
    let (skewness, kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    Ok(StatsRow {
        mean,
        skewness,
        kurtosis,
        coefficient_of_variation: m2.sqrt() / mean.abs(),
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
