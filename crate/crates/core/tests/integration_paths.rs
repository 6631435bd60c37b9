use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seldiff::fixtures::{self, random_piecewise_r2};
use seldiff::verify::{
    boundary_between, boundary_certificate, check_gradient_ae, continuity_defects, integrate_path_rules,
    PiecewisePath, SelectionRule, CERTIFICATE_RADIUS,
};
use seldiff::setfield::Piecewise;
use seldiff::Prog;

fn pt(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]
}

#[test]
fn every_rule_integrates_segments_polylines_and_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..12 {
        let prog: Prog = random_piecewise_r2(&mut rng, i % 3 == 0);
        let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let paths = [
            PiecewisePath::segment(a.clone(), b.clone()).unwrap(),
            PiecewisePath::new(vec![a.clone(), b.clone(), c.clone()]).unwrap(),
            PiecewisePath::new(vec![a.clone(), b, c, a]).unwrap(),
        ];
        for path in &paths {
            for r in integrate_path_rules(&prog, path, &SelectionRule::ALL, 7).unwrap() {
                assert!(r.passes(2e-8), "{r:?}");
                if path.is_closed() {
                    assert!(r.estimate.abs() <= 1e-8, "{r:?}");
                }
            }
        }
    }
}

#[test]
fn integrals_add_over_concatenated_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..8 {
        let prog: Prog = random_piecewise_r2(&mut rng, false);
        let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let first = PiecewisePath::segment(a.clone(), b.clone()).unwrap();
        let second = PiecewisePath::segment(b, c).unwrap();
        let joined = first.concat(&second).unwrap();
        let rule = [SelectionRule::MinNorm];
        let e1 = integrate_path_rules(&prog, &first, &rule, 0).unwrap()[0].estimate;
        let e2 = integrate_path_rules(&prog, &second, &rule, 0).unwrap()[0].estimate;
        let e = integrate_path_rules(&prog, &joined, &rule, 0).unwrap()[0].estimate;
        assert!((e - e1 - e2).abs() <= 1e-8 * (1.0 + e.abs()), "{e} vs {e1} + {e2}");
    }
}

#[test]
fn reversed_path_negates_the_integral() {
    let prog = fixtures::curved_guard_program::<f64>();
    let fwd = PiecewisePath::segment(vec![-1.0, 0.3], vec![1.2, -0.4]).unwrap();
    let back = PiecewisePath::segment(vec![1.2, -0.4], vec![-1.0, 0.3]).unwrap();
    let r = [SelectionRule::SelectionGradient];
    let a = integrate_path_rules(&prog, &fwd, &r, 0).unwrap()[0].estimate;
    let b = integrate_path_rules(&prog, &back, &r, 0).unwrap()[0].estimate;
    assert!((a + b).abs() <= 1e-10);
}

#[test]
fn ad_gradient_is_correct_almost_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for i in 0..4 {
        let prog: Prog = random_piecewise_r2(&mut rng, i % 2 == 1);
        let report = check_gradient_ae(&prog, &[-2.0, -2.0], &[2.0, 2.0], 2000, &mut rng).unwrap();
        assert_eq!(report.failures, report.certificates.len());
        assert!(report.uncertified.is_empty());
        assert!(report.failure_fraction <= 1e-3, "{}", report.failure_fraction);
    }
}

#[test]
fn engineered_boundary_points_are_certified() {
    let prog = fixtures::curved_guard_program::<f64>();
    let (inside, outside) = boundary_between(&prog, &[0.0, 0.0], &[1.0, 0.2]).unwrap().unwrap();
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    prog.signature(&inside, &mut s1).unwrap();
    prog.signature(&outside, &mut s2).unwrap();
    assert_ne!(s1, s2);
    let cert = boundary_certificate(&prog, &inside, CERTIFICATE_RADIUS).unwrap().unwrap();
    assert!(cert.certified && cert.distance <= CERTIFICATE_RADIUS);
}

#[test]
fn selection_branches_meet_continuously() {
    let relu = seldiff::selection::prims::relu::<f64>();
    let d = continuity_defects(&relu, &[-1.0], &[2.0]).unwrap();
    assert_eq!(d.len(), 1);
    assert!(d[0] <= 1e-12);
}
