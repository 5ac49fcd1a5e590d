use opa_bench::fixtures::{published_rankings, reference_matrix};
use opa_bench::{sensitivity_permutations, spearman, spearman_heatmap, DecisionMatrix, MethodRegistry, RankingVector};
use opa_core::opa::RankingProfile;
use opa_core::pr::{degenerate_intervals, PrProfile};
use opa_core::utility::{integer_grid, PiecewiseLinearUtility};
use proptest::prelude::*;

#[test]
fn topsis_and_moora_rows() {
    let m = reference_matrix().unwrap();
    let published = published_rankings().unwrap();
    let reg = MethodRegistry::default();
    for name in ["TOPSIS", "MOORA"] {
        let out = reg.evaluate(name, &m).unwrap();
        assert_eq!(&out.ranking, published.get(name).unwrap(), "{name}");
    }
}

#[test]
fn vikor_row() {
    let m = reference_matrix().unwrap();
    let out = MethodRegistry::default().evaluate("VIKOR", &m).unwrap();
    let expected = published_rankings().unwrap().get("VIKOR").unwrap().clone();
    let q = &out.details.iter().find(|(k, _)| k == "Q").unwrap().1;
    assert_eq!(out.ranking, expected, "Q = {q:?}");
}

#[test]
fn golden_correlations() {
    let p = published_rankings().unwrap();
    let pr = p.get("OPA-PR").unwrap();
    for (other, want) in [("VIKOR", 0.7576), ("MAUT", 0.7697), ("OPA", 0.8788)] {
        let rho = spearman(pr, p.get(other).unwrap()).unwrap();
        assert!((rho - want).abs() <= 5e-5, "{other}: {rho}");
    }
    // 1 - 6 * 40 / 990 exactly.
    assert_eq!(spearman(pr, p.get("VIKOR").unwrap()).unwrap(), 1.0 - 240.0 / 990.0);
    let heat = spearman_heatmap(&p.named()).unwrap();
    assert_eq!(heat.get("OPA-PR", "MAUT"), heat.get("MAUT", "OPA-PR"));
    assert_eq!(heat.get("TOPSIS", "TOPSIS"), Some(1.0));
    assert!(heat.values.iter().flatten().all(|v| v.abs() <= 1.0));
}

#[test]
fn five_experts_give_all_orderings() {
    let ranking = RankingProfile::with_identity_alternatives(vec![3, 1, 5, 2, 4], vec![vec![1, 2, 3]; 5], 4).unwrap();
    let iv = degenerate_intervals(&ranking);
    let u = PiecewiseLinearUtility::from_values(integer_grid(4), vec![0.0, 0.4, 0.7, 0.9, 1.0]).unwrap();
    let p = PrProfile::uniform(ranking, iv, u).unwrap();
    let rep = sensitivity_permutations(&p, 120, 1).unwrap();
    assert_eq!(rep.scenarios.len(), 120);
    assert!(rep.exhaustive);
    for s in &rep.scenarios {
        assert!((s.total - 1.0).abs() <= 1e-9);
        assert!((s.weights.expert.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

fn matrix_strategy() -> impl Strategy<Value = DecisionMatrix> {
    (1usize..5, 2usize..8).prop_flat_map(|(a, k)| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), a)
            .prop_map(|values| DecisionMatrix::with_equal_weights(values).unwrap())
    })
}

proptest! {
    #[test]
    fn rankings_ignore_uniform_scaling(m in matrix_strategy(), c in 0.1f64..100.0) {
        let reg = MethodRegistry::default();
        for name in reg.names() {
            let a = reg.evaluate(name, &m).unwrap();
            let b = reg.evaluate(name, &m.scaled(c)).unwrap();
            for (x, y) in a.scores.iter().zip(&b.scores) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn spearman_bounds_and_symmetry(a in Just((1..=8usize).collect::<Vec<_>>()).prop_shuffle(),
                                    b in Just((1..=8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let (ra, rb) = (RankingVector::new(a).unwrap(), RankingVector::new(b).unwrap());
        let rho = spearman(&ra, &rb).unwrap();
        prop_assert!(rho.abs() <= 1.0);
        prop_assert_eq!(rho, spearman(&rb, &ra).unwrap());
        prop_assert_eq!(spearman(&ra, &ra).unwrap(), 1.0);
        let rev = RankingVector::new(ra.ranks.iter().map(|r| 9 - r).collect()).unwrap();
        prop_assert_eq!(spearman(&ra, &rev).unwrap(), -1.0);
    }
}
