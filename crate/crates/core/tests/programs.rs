use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use seldiff::autodiff::{
    backward_ad, check_backprop_identity, check_modes_agree, forward_ad, gradient, prescribe_derivative,
};
use seldiff::fixtures::{self, random_dag, random_piecewise_r2};
use seldiff::selection::prims;
use seldiff::setfield::{program_generators, Piecewise, DEFAULT_ASSIGNMENT_CAP};
use seldiff::{Prog, Selection};

fn point(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn kink_family_values_in_both_modes() {
    for (name, prog, want) in fixtures::kink_family::<f64>() {
        let (_, trace) = prog.evaluate(&[0.0]).unwrap();
        let f = forward_ad(&prog, &trace).unwrap();
        let b = backward_ad(&prog, &trace).unwrap();
        assert_eq!(f.gradient(), &[want], "{name} forward");
        assert_eq!(b.gradient(), &[want], "{name} backward");
    }
}

#[test]
fn modes_agree_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let p = rng.random_range(1..=3);
        let prog: Prog = random_dag(&mut rng, p, 30);
        let x = point(&mut rng, p);
        let d = check_modes_agree(&prog, &x).unwrap();
        assert!(d <= 1e-12, "discrepancy {d}");
    }
}

#[test]
fn backprop_identity_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = rng.random_range(1..=3);
        let m = rng.random_range(p + 1..=12);
        let ds: Vec<Vec<f64>> = (p..m)
            .map(|k| (0..m).map(|j| if j < k { rng.sample(StandardNormal) } else { 0.0 }).collect())
            .collect();
        assert!(check_backprop_identity(p, m, &ds).unwrap() <= 1e-12);
    }
}

#[test]
fn dag_programs_match_their_flattened_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut compared = 0;
    while compared < 60 {
        let p = rng.random_range(1..=2);
        let prog: Prog = random_dag(&mut rng, p, 7);
        let Ok(sel) = prog.to_selection(10_000) else { continue };
        for _ in 0..20 {
            let x = point(&mut rng, p);
            let a = prog.call1(&x).unwrap();
            let b = sel.eval(&x).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            let ga = gradient(&prog, &x).unwrap();
            let gb = sel.selection_gradient(&x).unwrap();
            for (u, v) in ga.iter().zip(&gb) {
                assert!((u - v).abs() <= 1e-10 * (1.0 + u.abs()), "{ga:?} vs {gb:?}");
            }
        }
        compared += 1;
    }
}

#[test]
fn ad_gradient_is_a_field_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..200 {
        let prog: Prog = random_piecewise_r2(&mut rng, i % 2 == 0);
        let x = point(&mut rng, 2);
        let field = program_generators(&prog, &x, 1e-9, DEFAULT_ASSIGNMENT_CAP).unwrap();
        let g = gradient(&prog, &x).unwrap();
        assert_eq!(field.selection_gradient(), g.as_slice());
        assert!(field.contains(&g));
    }
}

#[test]
fn prescribed_derivative_shift_on_base_programs() {
    let bases: Vec<Prog> = vec![fixtures::square_program(), fixtures::relu_program(), fixtures::relu3_program()];
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for base in &bases {
        for &(s, r) in &[(0.0, 1.0), (0.5, -2.0), (-1.25, 3.5)] {
            let q = prescribe_derivative(base, 0, s, r).unwrap();
            assert!(q.validate().is_empty());
            for _ in 0..1000 {
                let x = [rng.random_range(-3.0..3.0)];
                assert_eq!(q.call1(&x).unwrap().to_bits(), base.call1(&x).unwrap().to_bits());
            }
            let before = gradient(base, &[s]).unwrap()[0];
            let after = gradient(&q, &[s]).unwrap()[0];
            assert_eq!(after, before + r);
        }
    }
}

#[test]
fn json_roundtrip_preserves_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let prog: Prog = random_piecewise_r2(&mut rng, true);
        let back = Prog::from_json(&prog.to_json()).unwrap();
        assert_eq!(back, prog);
    }
}

#[test]
fn program_trait_view_matches_direct_evaluation() {
    let prog = fixtures::curved_guard_program::<f64>();
    for x in [[0.0, 0.0], [1.0, 0.5], [0.5, 0.0]] {
        let (v, g) = prog.value_and_gradient(&x).unwrap();
        assert_eq!(v, prog.call1(&x).unwrap());
        assert_eq!(g, gradient(&prog, &x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_rule_for_selection_gradients(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -3.0f64..3.0) {
        let f: Selection = prims::affine(vec![a], b).sum(&prims::relu()).unwrap();
        let g = prims::abs::<f64>().scale(0.5);
        let h = f.sum(&g).unwrap();
        let want = f.selection_gradient(&[x]).unwrap()[0] + g.selection_gradient(&[x]).unwrap()[0];
        prop_assert!((h.selection_gradient(&[x]).unwrap()[0] - want).abs() <= 1e-12);
        prop_assert!((h.eval(&[x]).unwrap() - f.eval(&[x]).unwrap() - g.eval(&[x]).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn chain_rule_for_nested_compositions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f: Selection = prims::identity();
        let unary = [prims::relu::<f64>(), prims::abs(), prims::relu_strict()];
        for _ in 0..6 {
            let outer = if rng.random_bool(0.5) {
                unary[rng.random_range(0..unary.len())].clone()
            } else {
                prims::affine(vec![rng.random_range(-2.0..2.0)], rng.random_range(-1.0..1.0))
            };
            let d = seldiff::verify::check_chain_rule_scalar(&outer, std::slice::from_ref(&f), &[rng.random_range(-2.0..2.0)], 10_000).unwrap();
            prop_assert!(d <= 1e-12);
            f = Selection::compose(&outer, &[f], 10_000).unwrap();
        }
    }

    #[test]
    fn evaluation_is_deterministic_on_dags(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prog: Prog = random_dag(&mut rng, 2, 20);
        let x = point(&mut rng, 2);
        let (a, ta) = prog.evaluate(&x).unwrap();
        let (b, tb) = prog.evaluate(&x).unwrap();
        prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
        prop_assert_eq!(ta.branches(), tb.branches());
    }
}
