mod common;

use opa_core::pr::{solve_stage2_closed_form, PrProfile};
use opa_core::prs::{
    brute_force_fragility, fragility, fragility_of_weights, solve_opa_prs, AffineSlack, ExpertInterval, PrsInstance,
};
use opa_lp::{solve_lp, LinearProgram, Relation};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn intervals(rng: &mut ChaCha8Rng, p: &PrProfile) -> Vec<ExpertInterval> {
    p.ranking
        .t
        .iter()
        .map(|&t| {
            let t = t as f64;
            ExpertInterval { lo: rng.gen_range((t - 2.0).max(0.5)..=t), hi: rng.gen_range(t..=t + 2.0) }
        })
        .collect()
}

fn instance(rng: &mut ChaCha8Rng) -> PrsInstance {
    let p = common::pr_profile(rng, 3, 3, 4);
    let iv = intervals(rng, &p);
    let alpha = rng.gen_range(0.5..=1.0);
    PrsInstance::new(p, iv, alpha).unwrap()
}

/// Enforces the robust rows at `t`, `t_lo` and `t_hi` only.
fn endpoint_oracle(inst: &PrsInstance) -> f64 {
    let p = &inst.profile;
    let (ni, nj, nk) = (p.ranking.num_experts(), p.ranking.num_attributes(), p.ranking.num_alternatives());
    let n = ni * nj * nk;
    let z = inst.nominal_z().unwrap();
    let mut obj = vec![0.0; n + ni];
    obj[n..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(obj);
    let mut k = 0;
    for i in 0..ni {
        let t = p.ranking.t[i] as f64;
        let iv = inst.t_intervals[i];
        for j in 0..nj {
            let s = p.s_lo(i, j);
            for q in 0..nk {
                let target = inst.alpha * nk as f64 * inst.table.u[i][j][q] * z;
                for (x, dev) in [(t, 0.0), (iv.hi, iv.hi - t), (iv.lo, t - iv.lo)] {
                    lp.add_sparse(&[(k, x * s), (n + i, dev)], Relation::Ge, target);
                }
                k += 1;
            }
        }
    }
    let ones: Vec<(usize, f64)> = (0..n).map(|v| (v, 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    sol.objective_value
}

fn slacks(rng: &mut ChaCha8Rng, n: usize, nonneg_nominal: bool) -> Vec<AffineSlack> {
    (0..n)
        .map(|_| AffineSlack {
            value: if nonneg_nominal { rng.gen_range(0.0..1.0) } else { rng.gen_range(-0.2..1.0) },
            slope: rng.gen_range(-1.0..1.0),
        })
        .collect()
}

fn random_interval(rng: &mut ChaCha8Rng) -> (ExpertInterval, f64) {
    let t = rng.gen_range(1.0..5.0);
    (ExpertInterval { lo: t - rng.gen_range(0.0..2.0), hi: t + rng.gen_range(0.0..2.0) }, t)
}

/// Affine function that is nonnegative on the interval.
fn nonneg_on(rng: &mut ChaCha8Rng, iv: ExpertInterval, t: f64) -> AffineSlack {
    let value = rng.gen_range(0.0..1.0);
    let lo = if iv.hi > t { -value / (iv.hi - t) } else { -1.0 };
    let hi = if iv.lo < t { value / (t - iv.lo) } else { 1.0 };
    AffineSlack { value, slope: rng.gen_range(lo..=hi) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lp_matches_endpoint_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let inst = instance(&mut rng);
        let res = solve_opa_prs(&inst).unwrap();
        let oracle = endpoint_oracle(&inst);
        prop_assert!((res.total_fragility - oracle).abs() <= 1e-7, "lp {} oracle {}", res.total_fragility, oracle);
        let phi = fragility_of_weights(&inst, &res.weights.w).unwrap();
        prop_assert!((phi + res.total_fragility).abs() <= 1e-7);
        prop_assert!((res.weights.total() - 1.0).abs() <= 1e-9);
        prop_assert!(res.eta.iter().all(|e| *e >= 0.0));
    }

    #[test]
    fn degenerate_full_target_recovers_stage2(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let p = common::pr_profile(&mut rng, 3, 3, 4);
        let iv = PrsInstance::degenerate_intervals(&p);
        let inst = PrsInstance::new(p, iv, 1.0).unwrap();
        let res = solve_opa_prs(&inst).unwrap();
        prop_assert!(res.total_fragility.abs() <= 1e-9);
        let cf = solve_stage2_closed_form(&inst.profile, &inst.table).unwrap();
        for (a, b) in res.weights.flat().iter().zip(cf.flat()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn lower_targets_and_narrower_intervals_reduce_fragility(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut inst = instance(&mut rng);
        inst.alpha = 1.0;
        let mut last = f64::INFINITY;
        for alpha in [1.0, 0.9, 0.8, 0.7, 0.5, 0.0] {
            inst.alpha = alpha;
            let total = solve_opa_prs(&inst).unwrap().total_fragility;
            prop_assert!(total <= last + 1e-9);
            last = total;
        }
        inst.alpha = 0.9;
        let base = solve_opa_prs(&inst).unwrap().total_fragility;
        let i = rng.gen_range(0..inst.t_intervals.len());
        let iv = &mut inst.t_intervals[i];
        iv.lo = (iv.lo - rng.gen_range(0.0..1.0)).max(0.25);
        iv.hi += rng.gen_range(0.0..1.0);
        let wider = solve_opa_prs(&inst).unwrap().total_fragility;
        prop_assert!(wider >= base - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fragility_functional_properties(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (iv, t) = random_interval(&mut rng);
        let n = rng.gen_range(1..=6);
        let v = slacks(&mut rng, n, true);
        let phi = fragility(&v, iv, t);
        prop_assert!(phi <= 0.0);
        prop_assert!((brute_force_fragility(&v, iv, t, 101) - phi).abs() <= 1e-6);
        for lambda in [0.0, 0.5, 2.0, 10.0] {
            let scaled: Vec<AffineSlack> = v.iter().map(|s| s.scaled(lambda)).collect();
            prop_assert!((fragility(&scaled, iv, t) - lambda * phi).abs() <= 1e-9);
        }
        let w = slacks(&mut rng, n, true);
        let sum: Vec<AffineSlack> = v.iter().zip(&w).map(|(a, b)| a.plus(b)).collect();
        prop_assert!(fragility(&sum, iv, t) >= phi + fragility(&w, iv, t) - 1e-9);
        let bigger: Vec<AffineSlack> = v.iter().map(|s| s.plus(&nonneg_on(&mut rng, iv, t))).collect();
        prop_assert!(fragility(&bigger, iv, t) >= phi - 1e-12);
        let safe: Vec<AffineSlack> = (0..n).map(|_| nonneg_on(&mut rng, iv, t)).collect();
        prop_assert_eq!(fragility(&safe, iv, t), 0.0);
        let mixed = slacks(&mut rng, n, false);
        let m = fragility(&mixed, iv, t);
        let b = brute_force_fragility(&mixed, iv, t, 101);
        prop_assert!(m == b || (m - b).abs() <= 1e-6);
    }
}
