use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmecor::bro::{build_bro_milp, c18_oracle, solve_bro, BroModel, BroOptions, JointSequence};
use tmecor::game::examples::toy3;
use tmecor::game::{build_kuhn, GameTree, SequenceId};
use tmecor::lp::{solve_lp, Sense, VarId};
use tmecor::master::HybridColumn;
use tmecor::sequence::{random_plan_with, random_pure_plan_with, PurePlan, RealizationPlan};
use tmecor::verify::{brute_force_best_response, exhaustive_best_response, DEFAULT_CAP};

fn kuhn(ranks: usize) -> GameTree<f64> {
    build_kuhn(3, ranks).unwrap()
}

#[test]
fn four_player_kuhn_associated_constraints() {
    let g: GameTree<f64> = build_kuhn(4, 4).unwrap();
    let r_n = RealizationPlan::uniform(&g, g.adversary());
    let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
    let dump = bro.associated_dump(&g);
    for line in [
        "w(J:/:c|Q:/c:c|T:/cc:c) = w(J:/cccr:c|Q:/c:c|T:/cc:c) + w(J:/cccr:f|Q:/c:c|T:/cc:c)",
        "w(J:/:c|Q:/c:c|∅) = w(J:/:c|Q:/c:c|T:/cc:c) + w(J:/:c|Q:/c:c|T:/cc:r)",
        "w(J:/:c|∅|∅) = w(J:/:c|Q:/c:c|∅) + w(J:/:c|Q:/c:r|∅)",
        "w(J:/cccr:c|Q:/c:c|T:/cc:c) = w(J:/cccr:c|Q:/cccrc:c|T:/cc:c) + w(J:/cccr:c|Q:/cccrc:f|T:/cc:c)",
        "w(J:/cccr:c|Q:/cccrc:c|T:/cc:c) = w(J:/cccr:c|Q:/cccrc:c|T:/cccrcc:c) + w(J:/cccr:c|Q:/cccrc:c|T:/cccrcc:f)",
    ] {
        assert!(dump.lines().any(|l| l == line), "missing: {line}");
    }

    // the all-empty joint sequence is forced to one
    let root = JointSequence(vec![SequenceId(0); g.team_size()]);
    let k = bro.table.get(&root).expect("root joint is tabled");
    for sense in [Sense::Minimize, Sense::Maximize] {
        let mut m = bro.model.clone();
        m.set_objective(sense, vec![(bro.w_vars[k], 1.0)]);
        let r = solve_lp(&m, 1e-9).unwrap();
        assert!((r.objective_value - 1.0).abs() < 1e-9);
    }
}

/// Full assignment of the MILP variables for the given team plans, with
/// every `w` set to the product of its components.
fn product_assignment(bro: &BroModel<f64>, plans: &[RealizationPlan<f64>]) -> Vec<f64> {
    let mut x = vec![0.0; bro.model.num_vars()];
    for (p, vars) in bro.r_vars.iter().enumerate() {
        for (s, v) in vars.iter().enumerate() {
            x[v.0] = plans[p].probs[s];
        }
    }
    for (k, js) in bro.table.entries().iter().enumerate() {
        x[bro.w_vars[k].0] = js.0.iter().enumerate().map(|(p, &s)| plans[p].get(s)).product();
    }
    x
}

#[test]
fn associated_constraints_hold_for_products_of_random_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for g in [toy3(), kuhn(3), kuhn(4)] {
        let adv = g.adversary();
        let r_n = random_plan_with(&g, adv, &mut rng);
        let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
        for _ in 0..100 {
            let pure: Vec<PurePlan> = g.team().map(|p| random_pure_plan_with(&g, p, &mut rng)).collect();
            let plans: Vec<RealizationPlan<f64>> = pure.iter().map(|p| p.to_realization()).collect();
            let x = product_assignment(&bro, &plans);
            for c in &bro.associated {
                let lhs = x[bro.w_vars[c.lhs].0];
                let rhs: f64 = c.rhs.iter().map(|&k| x[bro.w_vars[k].0]).sum();
                assert!((lhs - rhs).abs() < 1e-12);
            }
            // the whole model accepts the assignment and prices it right
            assert!(bro.model.max_violation(&x) < 1e-12);
            let col = HybridColumn::from_pure(&g, &pure).unwrap();
            assert!((bro.model.evaluate(&x) - col.value_against(&r_n)).abs() < 1e-12);
        }
    }
}

#[test]
fn associated_constraints_hold_with_a_mixed_first_member() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = kuhn(3);
    let r_n = RealizationPlan::uniform(&g, g.adversary());
    let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
    for _ in 0..100 {
        let mut plans = vec![random_plan_with(&g, 0, &mut rng)];
        plans.extend((1..g.team_size()).map(|p| random_pure_plan_with(&g, p, &mut rng).to_realization()));
        let x = product_assignment(&bro, &plans);
        assert!(bro.model.max_violation(&x) < 1e-12);
    }
}

/// Tightest interval for `w` implied by the MR rows once every other
/// variable is fixed.
fn implied_interval(bro: &BroModel<f64>, w: VarId, x: &[f64]) -> (f64, f64) {
    let var = &bro.model.variables[w.0];
    let (mut lo, mut hi) = (var.lower.unwrap_or(f64::NEG_INFINITY), var.upper.unwrap_or(f64::INFINITY));
    for c in &bro.model.constraints {
        if !c.name.starts_with("mr_") {
            continue;
        }
        let Some(&(_, a)) = c.coeffs.iter().find(|(v, _)| *v == w) else {
            continue;
        };
        let rest: f64 = c.coeffs.iter().filter(|(v, _)| *v != w).map(|&(v, b)| b * x[v.0]).sum();
        // a·w + rest <= rhs
        let bound = (c.rhs - rest) / a;
        if a > 0.0 {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
    }
    (lo, hi)
}

#[test]
fn mr_rows_pin_w_to_the_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = kuhn(3);
    let r_n = RealizationPlan::uniform(&g, g.adversary());
    let bro = build_bro_milp(&g, &r_n, &BroOptions::default()).unwrap();
    let mut checked = 0;
    while checked < 10_000 {
        // MR rows are exact for any binary/continuous mix, flow or not
        let mut x = vec![0.0; bro.model.num_vars()];
        for (p, vars) in bro.r_vars.iter().enumerate() {
            for (s, v) in vars.iter().enumerate() {
                x[v.0] = match (s, p) {
                    (0, _) => 1.0,
                    (_, 0) => rng.gen::<f64>(),
                    _ => rng.gen_range(0..2) as f64,
                };
            }
        }
        for (k, js) in bro.table.entries().iter().enumerate() {
            let product: f64 = js.0.iter().enumerate().map(|(p, &s)| x[bro.r_vars[p][s.0].0]).product();
            let (lo, hi) = implied_interval(&bro, bro.w_vars[k], &x);
            assert!((lo - product).abs() < 1e-12 && (hi - product).abs() < 1e-12,
                "{}: [{lo}, {hi}] vs {product}", js.label(&g));
            checked += 1;
            if checked == 10_000 {
                break;
            }
        }
    }
}

fn three_way(g: &GameTree<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_n = random_plan_with(g, g.adversary(), &mut rng);
    let bf = brute_force_best_response(g, &r_n, DEFAULT_CAP).unwrap();
    let bro = solve_bro(g, &r_n).unwrap();
    let c18 = c18_oracle(g, &r_n).unwrap();
    assert!((bro.value - bf.value).abs() <= 1e-6, "seed {seed}: {} vs {}", bro.value, bf.value);
    assert!((c18.value - bf.value).abs() <= 1e-6, "seed {seed}: {} vs {}", c18.value, bf.value);
}

#[test]
fn oracles_agree_on_random_adversary_plans() {
    let toy = toy3();
    let g = kuhn(3);
    for seed in 0..20 {
        three_way(&toy, seed);
        three_way(&g, seed);
    }
}

#[test]
fn decomposed_enumeration_matches_full_enumeration() {
    let g = kuhn(3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let r_n = random_plan_with(&g, g.adversary(), &mut rng);
        let a = brute_force_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
        let b = exhaustive_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }
}

#[test]
fn folding_adversary_hand_check() {
    // adversary always plays `b` in the toy game: team picks the best of
    // u(x, y, b) = [-1, 2, 1, -3]
    let g = toy3();
    let r_n = RealizationPlan::new(2, vec![1.0, 0.0, 1.0, 0.0, 1.0]);
    let bf = brute_force_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
    assert_eq!(bf.value, 2.0);
    assert_eq!(solve_bro(&g, &r_n).unwrap().value, 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn best_response_ignores_plan_representation(seed in any::<u64>()) {
        // rebuilding r_n from its own sequence probabilities changes nothing
        let g = toy3();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_n = random_plan_with(&g, 2, &mut rng);
        let copy = RealizationPlan::new(2, r_n.probs.iter().map(|p| p + 0.0).collect());
        let a = brute_force_best_response(&g, &r_n, DEFAULT_CAP).unwrap();
        let b = brute_force_best_response(&g, &copy, DEFAULT_CAP).unwrap();
        prop_assert_eq!(&a, &b);
        let s = solve_bro(&g, &r_n).unwrap();
        prop_assert!((s.value - a.value).abs() <= 1e-6);
    }
}
