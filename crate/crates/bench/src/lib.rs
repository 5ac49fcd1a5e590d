//! Benchmark multi-attribute rankers, Spearman correlation and the
//! expert-permutation sensitivity harness.

pub mod error;
pub mod fixtures;
pub mod matrix;
pub mod methods;
pub mod sensitivity;
pub mod spearman;
pub mod stats;

pub use error::{BenchError, Result};
pub use matrix::{DecisionMatrix, RankingVector};
pub use methods::{MethodOutput, MethodRegistry, Moora, RankingMethod, Topsis, Vikor};
pub use sensitivity::{sensitivity_permutations, EntityStats, Scenario, SensitivityReport};
pub use spearman::{average_ranks, spearman, spearman_heatmap, Heatmap};
pub use stats::{descriptive_stats, StatsRow};
