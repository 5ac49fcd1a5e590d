use opa_lp::{solve_lp, solve_milp, LinearProgram, LpStatus, MixedProgram, Relation};
use proptest::prelude::*;

fn random_box_lp(n: usize) -> impl Strategy<Value = LinearProgram> {
    let obj = prop::collection::vec(-5.0..5.0f64, n);
    let rows = prop::collection::vec((prop::collection::vec(-3.0..3.0f64, n), 0.0..4.0f64), 0..6);
    (obj, rows).prop_map(move |(obj, rows)| {
        let mut lp = LinearProgram::maximize(obj);
        for j in 0..n {
            lp.set_bounds(j, 0.0, 1.0);
        }
        for (a, b) in rows {
            lp.add_constraint(a, Relation::Le, b);
        }
        lp
    })
}

// Vertex enumeration over all pairs of tight lines in two dimensions.
fn brute_force_2d(lp: &LinearProgram) -> f64 {
    let mut lines: Vec<([f64; 2], f64)> =
        vec![([1.0, 0.0], 0.0), ([1.0, 0.0], 1.0), ([0.0, 1.0], 0.0), ([0.0, 1.0], 1.0)];
    for c in &lp.constraints {
        lines.push(([c.coefficients[0], c.coefficients[1]], c.rhs));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..lines.len() {
        for k in i + 1..lines.len() {
            let (a, b) = lines[i];
            let (c, d) = lines[k];
            let det = a[0] * c[1] - a[1] * c[0];
            if det.abs() < 1e-9 {
                continue;
            }
            let x = [(b * c[1] - a[1] * d) / det, (a[0] * d - b * c[0]) / det];
            if lp.max_violation(&x) <= 1e-9 {
                best = best.max(lp.objective_value(&x));
            }
        }
    }
    best
}

proptest! {
    #[test]
    fn matches_vertex_enumeration(lp in random_box_lp(2)) {
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!((sol.objective_value - brute_force_2d(&lp)).abs() < 1e-7);
    }

    #[test]
    fn optimal_points_are_feasible_and_deterministic(lp in random_box_lp(5)) {
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&a.variable_values) <= 1e-7);
    }

    #[test]
    fn milp_never_beats_relaxation(lp in random_box_lp(4)) {
        let relaxed = solve_lp(&lp).unwrap();
        let mixed = solve_milp(&MixedProgram::new(lp.clone(), vec![0, 1, 2, 3])).unwrap();
        // The origin is feasible, so an integer point always exists.
        prop_assert_eq!(mixed.status, LpStatus::Optimal);
        prop_assert!(mixed.objective_value <= relaxed.objective_value + 1e-7);
        let mut best = f64::NEG_INFINITY;
        for mask in 0..16u32 {
            let x: Vec<f64> = (0..4).map(|j| ((mask >> j) & 1) as f64).collect();
            if lp.max_violation(&x) <= 1e-9 {
                best = best.max(lp.objective_value(&x));
            }
        }
        prop_assert!((mixed.objective_value - best).abs() < 1e-7);
    }
}
