use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seldiff::fixtures::{self, random_piecewise_r2};
use seldiff::minnorm::{hull_excess, min_norm_point};
use seldiff::selection::prims;
use seldiff::setfield::{
    active_jacobians, clarke_sample, classify, closed_graph_probe, program_generators, ClassifyOptions, Criticality,
    SequenceSpec, DEFAULT_ASSIGNMENT_CAP,
};
use seldiff::Prog;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Smallest norm over every subset's affine minimizer that lands in the simplex.
fn brute_min_norm(gens: &[Vec<f64>]) -> f64 {
    let n = gens.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[r][c] = dot(&gens[i], &gens[j]);
            }
            a[r][k] = 1.0;
            a[k][r] = 1.0;
        }
        let mut b = vec![0.0; k + 1];
        b[k] = 1.0;
        let Some(sol) = gauss(a, b) else { continue };
        if sol[..k].iter().any(|&w| w < -1e-12) {
            continue;
        }
        let mut v = vec![0.0; gens[0].len()];
        for (&i, &w) in idx.iter().zip(&sol) {
            for (vi, gi) in v.iter_mut().zip(&gens[i]) {
                *vi += w * gi;
            }
        }
        best = best.min(dot(&v, &v).sqrt());
    }
    best
}

#[test]
fn relu_field_at_the_kink() {
    let relu = fixtures::relu_program::<f64>();
    let field = program_generators(&relu, &[0.0], 1e-9, DEFAULT_ASSIGNMENT_CAP).unwrap();
    let mut g: Vec<f64> = field.generators.iter().map(|v| v[0]).collect();
    g.sort_by(f64::total_cmp);
    assert_eq!(g, vec![0.0, 1.0]);
    assert_eq!(min_norm_point(&field.generators).norm, 0.0);
}

#[test]
fn sorting_field_at_tie_and_off_tie() {
    let sort = prims::sort2::<f64>();
    let tie = active_jacobians(&sort, &[1.0, 1.0], 1e-9).unwrap();
    assert_eq!(tie.len(), 2);
    let mut gens = tie.generators.clone();
    gens.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(gens, vec![vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]]);
    assert_eq!(active_jacobians(&sort, &[1.0, 2.0], 1e-9).unwrap().len(), 1);
}

#[test]
fn generators_are_gradients_of_branches_active_nearby() {
    // every generator must be realized as the AD gradient somewhere close
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let prog: Prog = random_piecewise_r2(&mut rng, false);
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let field = program_generators(&prog, &x, 1e-9, DEFAULT_ASSIGNMENT_CAP).unwrap();
        assert!(!field.truncated);
        let g = seldiff::autodiff::gradient(&prog, &x).unwrap();
        assert!(field.contains(&g));
    }
}

#[test]
fn field_grows_with_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..40 {
        let prog: Prog = random_piecewise_r2(&mut rng, true);
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let tight = program_generators(&prog, &x, 1e-12, DEFAULT_ASSIGNMENT_CAP).unwrap();
        let loose = program_generators(&prog, &x, 1e-3, DEFAULT_ASSIGNMENT_CAP).unwrap();
        for g in &tight.generators {
            assert!(loose.contains(g));
        }
    }
}

#[test]
fn clarke_cloud_lies_in_the_field_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let progs: Vec<(Prog, Vec<f64>)> = vec![
        (fixtures::relu_program(), vec![0.0]),
        (fixtures::relu3_program(), vec![0.0]),
        (fixtures::curved_guard_program(), vec![0.5, 0.0]),
    ];
    for (prog, x) in progs {
        let field = program_generators(&prog, &x, 1e-9, DEFAULT_ASSIGNMENT_CAP).unwrap();
        let cloud = clarke_sample(&prog, &x, 1e-6, 100, &mut rng).unwrap();
        assert!(cloud.sufficient);
        let excess = hull_excess(&cloud.gradients, &field.generators);
        assert!(excess <= 1e-5, "excess {excess}");
    }
}

#[test]
fn taxonomy_of_reference_points() {
    let opts = ClassifyOptions::default();
    let zero_minus = fixtures::identity_minus_zero_program::<f64>();
    assert_eq!(classify(&fixtures::relu_program::<f64>(), &[0.0], &opts).unwrap().classification, Criticality::ClarkeCritical);
    assert_eq!(classify(&fixtures::square_program::<f64>(), &[0.0], &opts).unwrap().classification, Criticality::ClarkeCritical);
    assert_eq!(classify(&fixtures::square_program::<f64>(), &[1.0], &opts).unwrap().classification, Criticality::NonCritical);
    let r = classify(&zero_minus, &[0.0], &opts).unwrap();
    assert_eq!(r.classification, Criticality::ArtificialCritical);
    assert!(r.selection_critical());
}

#[test]
fn closed_graph_limits_belong_to_the_field() {
    let cases: Vec<(Prog, Vec<f64>, Vec<f64>)> = vec![
        (fixtures::relu_program(), vec![0.0], vec![1.0]),
        (fixtures::relu_program(), vec![0.0], vec![-1.0]),
        (fixtures::zero_program(), vec![0.0], vec![0.5]),
        (fixtures::curved_guard_program(), vec![0.5, 0.0], vec![1.0, 0.3]),
        (fixtures::curved_guard_program(), vec![0.5, 0.0], vec![-1.0, 0.2]),
    ];
    for (prog, c, d) in cases {
        for seq in [
            SequenceSpec::Harmonic { direction: d.clone(), count: 1000 },
            SequenceSpec::Geometric { direction: d.clone(), count: 40 },
        ] {
            let r = closed_graph_probe(&prog, &c, &seq, 1e-6).unwrap();
            assert!(r.distance <= 1e-6, "{r:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn min_norm_matches_subset_oracle(
        gens in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2..=3), 1..=5)
            .prop_filter("equal lengths", |g| g.iter().all(|v| v.len() == g[0].len()))
    ) {
        let r = min_norm_point(&gens);
        let oracle = brute_min_norm(&gens);
        prop_assert!((r.norm - oracle).abs() <= 1e-9 * (1.0 + oracle), "{} vs {}", r.norm, oracle);
        let total: f64 = r.weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(r.weights.iter().all(|&w| w >= -1e-12));
        for g in &gens {
            let diff: Vec<f64> = g.iter().zip(&r.point).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&r.point, &diff) >= -1e-9);
        }
    }
}
