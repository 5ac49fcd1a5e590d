#![allow(dead_code)]

use opa_core::opa::RankingProfile;
use opa_core::pr::{PrProfile, RankInterval};
use opa_core::utility::{integer_grid, MomentConstraint, PiecewiseLinearUtility, StepFunction};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (1..=n).collect();
    p.shuffle(rng);
    p
}

pub fn ranking(rng: &mut ChaCha8Rng, max_i: usize, max_j: usize, max_k: usize) -> RankingProfile {
    let ni = rng.gen_range(1..=max_i);
    let nj = rng.gen_range(1..=max_j);
    let nk = rng.gen_range(1..=max_k);
    ranking_with(rng, ni, nj, nk)
}

pub fn ranking_with(rng: &mut ChaCha8Rng, ni: usize, nj: usize, nk: usize) -> RankingProfile {
    let t = permutation(rng, ni);
    let s = (0..ni).map(|_| permutation(rng, nj)).collect();
    let r = (0..ni).map(|_| (0..nj).map(|_| permutation(rng, nk)).collect()).collect();
    RankingProfile::new(t, s, r).unwrap()
}

/// Concave, increasing values on `grid` with `u(0) = 0` and `u(theta) = 1`.
pub fn concave_values(rng: &mut ChaCha8Rng, grid: &[f64]) -> Vec<f64> {
    let mut slopes: Vec<f64> = (1..grid.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut values = vec![0.0];
    for (k, m) in slopes.iter().enumerate() {
        values.push(values[k] + m * (grid[k + 1] - grid[k]));
    }
    let top = values[values.len() - 1];
    values.iter_mut().for_each(|v| *v /= top);
    *values.last_mut().unwrap() = 1.0;
    values
}

pub fn concave_utility(rng: &mut ChaCha8Rng, grid: Vec<f64>) -> PiecewiseLinearUtility {
    let values = concave_values(rng, &grid);
    PiecewiseLinearUtility::from_values(grid, values).unwrap()
}

pub fn max_slope(u: &PiecewiseLinearUtility) -> f64 {
    u.slopes.iter().copied().fold(0.0, f64::max)
}

pub fn s_intervals(rng: &mut ChaCha8Rng, ranking: &RankingProfile) -> Vec<Vec<RankInterval>> {
    ranking
        .s
        .iter()
        .map(|row| row.iter().map(|&s| RankInterval { lo: rng.gen_range(1..=s), hi: s }).collect())
        .collect()
}

pub fn pr_profile(rng: &mut ChaCha8Rng, max_i: usize, max_j: usize, max_k: usize) -> PrProfile {
    let ranking = ranking(rng, max_i, max_j, max_k);
    let k = ranking.num_alternatives();
    let iv = s_intervals(rng, &ranking);
    let utilities = (0..ranking.num_experts())
        .map(|_| (0..ranking.num_attributes()).map(|_| concave_utility(rng, integer_grid(k))).collect())
        .collect();
    PrProfile::new(ranking, iv, utilities).unwrap()
}

/// Random step function with breakpoints on the integer grid `0..=r`.
pub fn grid_step(rng: &mut ChaCha8Rng, r: usize) -> StepFunction {
    let theta = r as f64;
    let mut cuts: Vec<f64> = (1..r).filter(|_| rng.gen_bool(0.4)).map(|x| x as f64).collect();
    cuts.insert(0, 0.0);
    cuts.push(theta);
    let levels = (1..cuts.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    StepFunction::new(theta, cuts, levels).unwrap()
}

/// Constraints `int psi du <= c` that `reference` satisfies with random slack.
pub fn constraints_around(
    rng: &mut ChaCha8Rng,
    reference: &PiecewiseLinearUtility,
    count: usize,
) -> Vec<MomentConstraint> {
    let r = reference.theta() as usize;
    (0..count)
        .map(|_| {
            let psi = grid_step(rng, r);
            let value = opa_core::utility::integrate_step_against_pl(&psi, reference).unwrap();
            MomentConstraint::new(psi, value + rng.gen_range(0.0..0.05))
        })
        .collect()
}
