use proptest::prelude::*;
use seldiff::fixtures;
use seldiff::optimize::{
    classify_run, draw_subset, minibatch_gradient, run_rng, sgd_run, trap_avoidance_experiment, BatchMode,
    ScheduleKind, SgdConfig, StepSchedule, TrapConfig,
};
use seldiff::setfield::{ClassifyOptions, Criticality};

#[test]
fn subsets_are_uniform_over_nonempty_sets() {
    let mut rng = run_rng(9, 0);
    let mut counts = [0usize; 8];
    let mut s = Vec::new();
    let draws = 70_000;
    for _ in 0..draws {
        draw_subset(&mut rng, 3, &mut s);
        let mask: usize = s.iter().map(|&i| 1 << i).sum();
        counts[mask] += 1;
    }
    assert_eq!(counts[0], 0);
    let expected = draws as f64 / 7.0;
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 6 degrees of freedom, 0.999 quantile
    assert!(chi2 < 22.46, "chi2 {chi2}");
}

#[test]
fn full_batch_gradient_is_the_mean() {
    let pr = fixtures::quadratic_problem::<f64>();
    let x = [0.3, 0.7];
    let full = minibatch_gradient(&pr, &[0, 1, 2], &x).unwrap();
    let g = seldiff::autodiff::gradient(pr.objective(), &x).unwrap();
    for (a, b) in full.iter().zip(&g) {
        assert!((a - b).abs() <= 1e-14);
    }
}

#[test]
fn runs_converge_to_clarke_critical_points_on_every_fixture() {
    let problems = [
        fixtures::quadratic_problem::<f64>(),
        fixtures::relu_neuron_problem(),
        fixtures::artefact_problem(),
    ];
    let starts: [&[f64]; 3] = [&[2.0, 1.0], &[0.5, 0.5], &[-1.5]];
    for (pr, x0) in problems.iter().zip(starts) {
        let cfg = SgdConfig { iters: 20_000, ..SgdConfig::default() };
        let run = sgd_run(pr, x0, &StepSchedule::power(0.5, 0.6).unwrap(), &cfg).unwrap();
        let v = classify_run(&run, pr, &ClassifyOptions::default()).unwrap();
        assert!(v.j_converged && !v.aborted);
        assert!(v.selection_critical(1e-6), "{:?}", v.terminal.d_distance);
        assert_eq!(v.terminal.classification, Criticality::ClarkeCritical);
    }
}

#[test]
fn trapped_start_stays_put_under_full_batch() {
    let pr = fixtures::artefact_problem::<f64>();
    let cfg = SgdConfig { iters: 5_000, stride: 1, batch: BatchMode::Full, ..SgdConfig::default() };
    let run = sgd_run(&pr, &[0.0], &StepSchedule::power(1.0, 0.6).unwrap(), &cfg).unwrap();
    assert!(run.trajectory.iter().all(|r| r.x[0] == 0.0));
    let v = classify_run(&run, &pr, &ClassifyOptions::default()).unwrap();
    assert_eq!(v.terminal.classification, Criticality::ArtificialCritical);
}

#[test]
fn experiment_summary_is_reproducible() {
    let pr = fixtures::artefact_problem::<f64>();
    let cfg = TrapConfig { n_inits: 16, iters: 2_000, target: Some(vec![1.0]), ..TrapConfig::default() };
    let a = trap_avoidance_experiment(&pr, &cfg).unwrap();
    let b = trap_avoidance_experiment(&pr, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.runs, 16);
    assert_eq!(a.artificial_critical, 0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| trap_avoidance_experiment(&pr, &cfg).unwrap());
    assert_eq!(a, c);
}

proptest! {
    #[test]
    fn step_sizes_decrease_and_stay_in_range(c in 0.01f64..=1.0, beta in 0.51f64..=1.0, k in 0usize..100_000) {
        for kind in [ScheduleKind::Power { beta }, ScheduleKind::LogDamped] {
            let s = StepSchedule::new(c, kind).unwrap();
            prop_assert!(s.gamma(k) > 0.0 && s.gamma(k) <= c);
            prop_assert!(s.gamma(k + 1) <= s.gamma(k));
            prop_assert!((s.gamma(k) - c * s.alpha(k)).abs() <= 1e-15);
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories(seed in any::<u64>(), run_id in 0u64..1000) {
        let pr = fixtures::quadratic_problem::<f64>();
        let cfg = SgdConfig { iters: 300, seed, run_id, stride: 7, ..SgdConfig::default() };
        let sched = StepSchedule::power(0.7, 0.8).unwrap();
        let a = sgd_run(&pr, &[0.1, 0.2], &sched, &cfg).unwrap();
        let b = sgd_run(&pr, &[0.1, 0.2], &sched, &cfg).unwrap();
        prop_assert_eq!(a.trajectory, b.trajectory);
    }
}
