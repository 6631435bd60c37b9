use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seldiff::fixtures::{random_expr, random_expr_at};
use seldiff::text::{expr_to_text, parse_expr};
use seldiff::Expr;

fn central_fd(e: &Expr, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (e.eval(&up).unwrap() - e.eval(&down).unwrap()) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences_on_random_expressions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 1500 {
        let arity = 1 + checked % 3;
        let (e, x) = random_expr_at::<f64, _>(&mut rng, arity, 5);
        let g = e.grad(&x).unwrap();
        let fd = central_fd(&e, &x, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!(
                (a - b).abs() <= 1e-6 * (1.0 + a.abs()),
                "{} at {x:?}: grad {g:?} fd {fd:?}",
                expr_to_text(&e)
            );
        }
        checked += 1;
    }
}

#[test]
fn materialized_derivatives_agree_with_reverse_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..300 {
        let (e, x) = random_expr_at::<f64, _>(&mut rng, 2, 4);
        let g = e.grad(&x).unwrap();
        for (k, gk) in g.iter().enumerate() {
            let d = e.derivative(k);
            assert_eq!(d.arity(), e.arity());
            let dv = d.eval(&x).unwrap();
            assert!((dv - gk).abs() <= 1e-12 * (1.0 + gk.abs()), "{dv} vs {gk}");
        }
    }
}

#[test]
fn evaluation_is_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (e, x) = random_expr_at::<f64, _>(&mut rng, 3, 5);
        let a = e.value_and_grad(&x).unwrap();
        let b = e.value_and_grad(&x).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert!(a.1.iter().zip(&b.1).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

#[test]
fn f32_instantiation_tracks_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (e, x) = random_expr_at::<f64, _>(&mut rng, 2, 3);
        let e32 = e.cast::<f32>();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        if let Ok(v) = e32.eval(&x32) {
            let w = e.eval(&x).unwrap();
            assert!(((v as f64) - w).abs() <= 1e-2 * (1.0 + w.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn text_roundtrip_is_exact(seed in any::<u64>(), arity in 1usize..4, depth in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr::<f64, _>(&mut rng, arity, depth);
        let back: Expr = parse_expr(&expr_to_text(&e), arity).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn affine_value_is_offset_plus_dot(c in prop::collection::vec(-10.0f64..10.0, 1..5), b in -5.0f64..5.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let e = Expr::affine(c.clone(), b);
        let want = c.iter().zip(&x).fold(b, |acc, (ci, xi)| acc + ci * xi);
        prop_assert_eq!(e.eval(&x).unwrap(), want);
        prop_assert_eq!(e.grad(&x).unwrap(), c);
    }
}
