use fleetplan::instance::{generate, Balance, GenSpec, Instance, Layout};
use fleetplan::lp::{solve_lp, LpStatus, Objective, Relation, Sense, Tolerances};
use fleetplan::model::StateKey;
use fleetplan::LinearProgram;
use proptest::prelude::*;

fn packing() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(0.1f64..5.0, n), m),
            prop::collection::vec(0.5f64..20.0, m),
            prop::collection::vec(-3.0f64..6.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// max c·x, Ax ≤ b, x ≥ 0 against its dual min b·y, Aᵀy ≥ c, y ≥ 0.
    #[test]
    fn packing_lp_is_feasible_and_matches_its_dual((a, b, c) in packing()) {
        let tol = Tolerances::default();
        let (m, n) = (a.len(), c.len());
        let mut primal = LinearProgram::new(Objective::new(Sense::Maximize, c.clone()));
        for (row, &rhs) in a.iter().zip(&b) {
            primal.add_constraint(row.iter().copied().enumerate().collect(), Relation::Le, rhs);
        }
        let mut dual = LinearProgram::new(Objective::new(Sense::Minimize, b.clone()));
        for j in 0..n {
            dual.add_constraint((0..m).map(|i| (i, a[i][j])).collect(), Relation::Ge, c[j]);
        }
        let p = solve_lp(&primal, &tol).unwrap();
        let d = solve_lp(&dual, &tol).unwrap();
        prop_assert_eq!(p.status, LpStatus::Optimal);
        prop_assert_eq!(d.status, LpStatus::Optimal);
        prop_assert!(primal.max_violation(&p.values) <= 1e-7);
        prop_assert!(dual.max_violation(&d.values) <= 1e-7);
        let scale = p.objective_value.abs().max(1.0);
        prop_assert!((p.objective_value - d.objective_value).abs() <= 1e-6 * scale,
            "primal {} dual {}", p.objective_value, d.objective_value);
        prop_assert!((primal.objective.value(&p.values) - p.objective_value).abs() <= 1e-9 * scale);
    }

    /// Equality systems built around a known nonnegative point are feasible,
    /// and the optimum is no worse than that point.
    #[test]
    fn planted_equality_system(
        a in prop::collection::vec(prop::collection::vec(-4.0f64..4.0, 5), 1..4),
        x in prop::collection::vec(0.0f64..3.0, 5),
        c in prop::collection::vec(0.1f64..2.0, 5),
    ) {
        let tol = Tolerances::default();
        let mut lp = LinearProgram::new(Objective::new(Sense::Minimize, c.clone()));
        for row in &a {
            let rhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            lp.add_constraint(row.iter().copied().enumerate().collect(), Relation::Eq, rhs);
        }
        let sol = solve_lp(&lp, &tol).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&sol.values) <= 1e-7);
        let planted: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
        prop_assert!(sol.objective_value <= planted + 1e-7 * planted.max(1.0));
    }

    #[test]
    fn infeasible_box_is_reported(lo in 1.0f64..10.0, gap in 0.01f64..5.0) {
        let mut lp = LinearProgram::new(Objective::new(Sense::Maximize, vec![1.0, 1.0]));
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Ge, lo + gap);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, lo);
        prop_assert_eq!(solve_lp(&lp, &Tolerances::default()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn instance_json_round_trip(
        which in 0usize..5,
        imbalanced in any::<bool>(),
        seed in 0u64..1_000_000,
    ) {
        let (layout, r) = [(Layout::Circular, 7), (Layout::Hexagonal, 19), (Layout::Quadratic, 4),
            (Layout::Quadratic, 9), (Layout::Quadratic, 16)][which];
        let balance = if imbalanced { Balance::Imbalanced } else { Balance::Balanced };
        let inst = generate(&GenSpec::new(layout, r, balance, seed)).unwrap();
        let text = inst.to_json();
        let back = Instance::from_json(&text, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn state_key_set_algebra(a in any::<u32>(), b in any::<u32>()) {
        let (s, t) = (StateKey(a as u64), StateKey((a | b) as u64));
        prop_assert!(s.is_subset_of(t));
        prop_assert_eq!(s.added_in(t).count(), t.len() - s.len());
        prop_assert_eq!(s.stations().count(), s.len());
        prop_assert_eq!(StateKey::from_stations(s.stations()), s);
        prop_assert_eq!(s.closed(32).count(), 32 - s.len());
    }
}
