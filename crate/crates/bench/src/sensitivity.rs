//! Re-solves the stage-2 model under permutations of the expert ranks.

use std::collections::HashSet;

use itertools::Itertools;
use opa_core::opa::{aggregate_weights, GroupWeights};
use opa_core::pr::{normalize_utilities, solve_stage2_closed_form, PrProfile};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::stats::{descriptive_stats, StatsRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub t: Vec<usize>,
    pub weights: GroupWeights,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityStats {
    pub entity: String,
    pub stats: StatsRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Scenario 0 always uses the nominal expert ranks.
    pub scenarios: Vec<Scenario>,
    pub exhaustive: bool,
    pub expert: Vec<EntityStats>,
    pub attribute: Vec<EntityStats>,
    pub alternative: Vec<EntityStats>,
}

fn factorial_at_most(n: usize, cap: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k).filter(|v| *v <= cap))
}

fn expert_orders(nominal: &[usize], cap: usize, seed: u64) -> (Vec<Vec<usize>>, bool) {
    let n = nominal.len();
    if factorial_at_most(n, cap).is_some() {
        let rest = (1..=n).permutations(n).filter(|p| p.as_slice() != nominal);
        return (std::iter::once(nominal.to_vec()).chain(rest).collect(), true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::from([nominal.to_vec()]);
    let mut orders = vec![nominal.to_vec()];
    let mut p: Vec<usize> = (1..=n).collect();
    while orders.len() < cap {
        p.shuffle(&mut rng);
        if seen.insert(p.clone()) {
            orders.push(p.clone());
        }
    }
    (orders, false)
}

fn column_stats(prefix: &str, columns: Vec<Vec<f64>>) -> Result<Vec<EntityStats>> {
    columns
        .into_iter()
        .enumerate()
        .map(|(k, samples)| {
            let stats = if samples.len() == 1 { StatsRow::single(samples[0]) } else { descriptive_stats(&samples)? };
            Ok(EntityStats { entity: format!("{prefix}{}", k + 1), stats })
        })
        .collect()
}

fn transpose(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::new(); width];
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    cols
}

/// Every expert-rank permutation when there are at most `cap` of them,
/// otherwise the nominal order plus `cap - 1` distinct seeded samples.
pub fn sensitivity_permutations(profile: &PrProfile, cap: usize, seed: u64) -> Result<SensitivityReport> {
    if cap == 0 {
        return Err(BenchError::InvalidArg("scenario cap must be at least 1".into()));
    }
    let table = normalize_utilities(profile)?;
    let (orders, exhaustive) = expert_orders(&profile.ranking.t, cap, seed);
    let mut scenarios = Vec::with_capacity(orders.len());
    for t in orders {
        let mut p = profile.clone();
        p.ranking.t = t.clone();
        let sol = solve_stage2_closed_form(&p, &table)?;
        scenarios.push(Scenario { t, total: sol.total(), weights: aggregate_weights(&sol) });
    }
    let r = &profile.ranking;
    let pick = |f: fn(&GroupWeights) -> &Vec<f64>, width: usize| {
        transpose(scenarios.iter().map(|s| f(&s.weights).clone()), width)
    };
    Ok(SensitivityReport {
        expert: column_stats("E", pick(|g| &g.expert, r.num_experts()))?,
        attribute: column_stats("C", pick(|g| &g.attribute, r.num_attributes()))?,
        alternative: column_stats("A", pick(|g| &g.alternative, r.num_alternatives()))?,
        scenarios,
        exhaustive,
    })
}
