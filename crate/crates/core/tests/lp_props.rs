use num_rational::Ratio;
use proptest::prelude::*;
use tmecor::lp::{solve_lp, solve_milp, LinearModel, Relation, Sense, Status, VarId};

fn relation(k: u8) -> Relation {
    match k % 3 {
        0 => Relation::Le,
        1 => Relation::Ge,
        _ => Relation::Eq,
    }
}

/// Random boxed LP from small integer data.
fn boxed_lp(n: usize, rows: &[(Vec<i8>, u8, i8)], obj: &[i8], sense: Sense) -> LinearModel<f64> {
    let mut m = LinearModel::new(sense);
    let vars: Vec<VarId> = (0..n)
        .map(|j| m.add_continuous(format!("x{j}"), -2.0, 3.0))
        .collect();
    for (i, (coef, rel, rhs)) in rows.iter().enumerate() {
        let coeffs = vars
            .iter()
            .zip(coef)
            .filter(|(_, &c)| c != 0)
            .map(|(&v, &c)| (v, c as f64))
            .collect();
        m.add_constraint(format!("r{i}"), coeffs, relation(*rel), *rhs as f64);
    }
    m.set_objective(sense, vars.iter().zip(obj).map(|(&v, &c)| (v, c as f64)).collect());
    m
}

fn lp_case() -> impl Strategy<Value = (usize, Vec<(Vec<i8>, u8, i8)>, Vec<i8>, bool)> {
    (1usize..6).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((prop::collection::vec(-4i8..5, n), 0u8..3, -6i8..7), 0..6),
            prop::collection::vec(-5i8..6, n),
            any::<bool>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn optimal_lps_carry_a_duality_certificate((n, rows, obj, max) in lp_case()) {
        let sense = if max { Sense::Maximize } else { Sense::Minimize };
        let m = boxed_lp(n, &rows, &obj, sense);
        let r = solve_lp(&m, 1e-9).unwrap();
        // boxed variables: never unbounded
        prop_assert_ne!(r.status, Status::Unbounded);
        if r.status == Status::Optimal {
            prop_assert!(m.max_violation(&r.primal) <= 1e-7);
            prop_assert!((m.evaluate(&r.primal) - r.objective_value).abs() <= 1e-7);
            let dual = m.dual_objective(&r.duals, 1e-7);
            prop_assert!(dual.is_some(), "dual signs wrong: {:?}", r.duals);
            prop_assert!((dual.unwrap() - r.objective_value).abs() <= 1e-6,
                "primal {} dual {:?}", r.objective_value, dual);
        }
    }

    #[test]
    fn milp_matches_enumeration(
        (n, rows, obj, max) in (1usize..7).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec((prop::collection::vec(-4i8..5, n), 0u8..2, -4i8..7), 0..5),
            prop::collection::vec(-5i8..6, n),
            any::<bool>(),
        ))
    ) {
        let sense = if max { Sense::Maximize } else { Sense::Minimize };
        let mut m = LinearModel::new(sense);
        let vars: Vec<VarId> = (0..n).map(|j| m.add_binary(format!("b{j}"))).collect();
        for (i, (coef, rel, rhs)) in rows.iter().enumerate() {
            let coeffs = vars.iter().zip(coef).map(|(&v, &c)| (v, c as f64)).collect();
            m.add_constraint(format!("r{i}"), coeffs, relation(*rel), *rhs as f64);
        }
        m.set_objective(sense, vars.iter().zip(&obj).map(|(&v, &c)| (v, c as f64)).collect());

        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
            if m.max_violation(&x) <= 1e-9 {
                let v = m.evaluate(&x);
                best = Some(match best {
                    None => v,
                    Some(b) if max => b.max(v),
                    Some(b) => b.min(v),
                });
            }
        }
        let r = solve_milp(&m, 1e-8, 100_000).unwrap();
        match best {
            None => prop_assert_eq!(r.status, Status::Infeasible),
            Some(b) => {
                prop_assert_eq!(r.status, Status::Optimal);
                prop_assert!((r.objective_value - b).abs() <= 1e-7);
                prop_assert!(m.max_violation(&r.primal) <= 1e-7);
                let lp = solve_lp(&m, 1e-9).unwrap();
                if max {
                    prop_assert!(lp.objective_value >= r.objective_value - 1e-7);
                } else {
                    prop_assert!(lp.objective_value <= r.objective_value + 1e-7);
                }
            }
        }
    }

    #[test]
    fn float_and_rational_routes_agree((n, rows, obj, max) in lp_case()) {
        let sense = if max { Sense::Maximize } else { Sense::Minimize };
        let m = boxed_lp(n, &rows, &obj, sense);
        let mut q = LinearModel::<Ratio<i128>>::new(sense);
        for v in &m.variables {
            q.add_var(
                v.name.clone(),
                v.lower.map(|x| Ratio::from_integer(x as i128)),
                v.upper.map(|x| Ratio::from_integer(x as i128)),
                v.integrality,
            );
        }
        let conv = |t: &[(VarId, f64)]| -> Vec<(VarId, Ratio<i128>)> {
            t.iter().map(|&(v, c)| (v, Ratio::from_integer(c as i128))).collect()
        };
        for c in &m.constraints {
            q.add_constraint(c.name.clone(), conv(&c.coeffs), c.relation, Ratio::from_integer(c.rhs as i128));
        }
        q.set_objective(sense, conv(&m.objective));
        let rf = solve_lp(&m, 1e-9).unwrap();
        let rq = solve_lp(&q, 0.0).unwrap();
        prop_assert_eq!(rf.status, rq.status);
        if rq.status == Status::Optimal {
            let exact = *rq.objective_value.numer() as f64 / *rq.objective_value.denom() as f64;
            prop_assert!((rf.objective_value - exact).abs() <= 1e-7);
            prop_assert_eq!(q.max_violation(&rq.primal), Ratio::from_integer(0));
            prop_assert_eq!(q.dual_objective(&rq.duals, Ratio::from_integer(0)), Some(rq.objective_value));
        }
    }
}
