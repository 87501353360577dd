mod common;

use common::*;
use lckf_core::constraints::ConstraintSchedule;
use lckf_core::filter::{run_filter, Start};
use lckf_core::harness::{
    compare_filters, reference_scenario, run_trials, validate_scenario, CheckStatus, FilterKind, Scenario,
};
use lckf_core::model::{simulate_from_prior, CrossCovariance, NoiseTerm};
use lckf_core::{Mat, Vector};

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

#[test]
fn noiseless_run_started_at_the_truth_has_zero_error() {
    let x1 = Vector::from_vec(vec![1.5, -0.5]);
    let mut scenario = reference_scenario();
    scenario.model.x0_mean = x1.clone();
    scenario.model.cx0 = Mat::zeros(2, 2);
    scenario.model.cw = vec![Mat::zeros(2, 2); 9];
    scenario.filter = FilterKind::Kf;
    scenario.trials = 1;
    let report = run_trials(&scenario).unwrap();
    for s in &report.steps {
        assert_eq!(s.est_mse_trace, 0.0);
        assert_eq!(s.bias_norm, 0.0);
    }
}

#[test]
fn reruns_are_identical() {
    let mut scenario = reference_scenario();
    scenario.trials = 700;
    assert_eq!(json(&run_trials(&scenario).unwrap()), json(&run_trials(&scenario).unwrap()));
    scenario.seed = 2;
    let other = run_trials(&scenario).unwrap();
    scenario.seed = 1;
    assert_ne!(json(&run_trials(&scenario).unwrap()), json(&other));
}

#[test]
fn reports_do_not_depend_on_the_thread_count() {
    let mut scenario = reference_scenario();
    scenario.trials = 1000;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| json(&compare_filters(&scenario, &[FilterKind::Kf, FilterKind::Lckf]).unwrap()))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn comparison_is_independent_of_filter_order() {
    let mut scenario = reference_scenario();
    scenario.trials = 300;
    let a = compare_filters(&scenario, &[FilterKind::Kf, FilterKind::Lmvdrf, FilterKind::Lckf]).unwrap();
    let b = compare_filters(&scenario, &[FilterKind::Lckf, FilterKind::Kf, FilterKind::Lmvdrf]).unwrap();
    assert_eq!(json(&a), json(&b));
    assert!(compare_filters(&scenario, &[]).is_err());
}

#[test]
fn unconstrained_lckf_is_the_kalman_filter() {
    let scenario = reference_scenario();
    let model = &scenario.model;
    for seed in 0..20 {
        let traj = simulate_from_prior(model, seed).unwrap();
        let unconstrained = ConstraintSchedule::unconstrained();
        let kf = run_filter(model, &Start::Prior, &unconstrained, &traj.measurements).unwrap();
        let lckf = run_filter(model, &Start::Prior, &ConstraintSchedule::from_blocks(vec![None; 10]), &traj.measurements).unwrap();
        for (a, b) in kf.iter().zip(&lckf) {
            assert!((&a.x_hat - &b.x_hat).amax() <= 1e-12);
        }
    }
    let mut s = scenario.clone();
    s.schedule = ConstraintSchedule::unconstrained();
    s.trials = 200;
    let report = compare_filters(&s, &[FilterKind::Kf, FilterKind::Lckf]).unwrap();
    for (a, b) in report.filters[0].steps.iter().zip(&report.filters[1].steps) {
        assert_eq!(a.est_mse_trace, b.est_mse_trace);
    }
}

#[test]
fn kalman_filter_beats_lmvdrf_with_a_correct_prior() {
    let mut scenario = reference_scenario();
    scenario.trials = 2000;
    let report = compare_filters(&scenario, &[FilterKind::Lmvdrf, FilterKind::Kf]).unwrap();
    let order = &report.orderings[0];
    assert_eq!((order.first.as_str(), order.second.as_str()), ("kf", "lmvdrf"));
    assert!(order.theoretical_trace_leq);
    assert!(order.min_eigen_gap >= -1e-9);
}

#[test]
fn lmvdrf_wins_early_under_a_misspecified_prior() {
    let mut scenario = reference_scenario();
    scenario.trials = 2000;
    scenario.x1_override = Some(Vector::from_vec(vec![8.0, -6.0]));
    let report = compare_filters(&scenario, &[FilterKind::Kf, FilterKind::Lmvdrf]).unwrap();
    let (kf, lmvdrf) = (report.filter("kf").unwrap(), report.filter("lmvdrf").unwrap());
    for k in 1..=2 {
        assert!(lmvdrf.step(k).est_mse_trace < kf.step(k).est_mse_trace, "step {k}");
    }
}

#[test]
fn empirical_covariance_matches_the_filter_covariance() {
    let mut scenario = reference_scenario();
    scenario.trials = 100_000;
    let report = compare_filters(&scenario, &[FilterKind::Kf, FilterKind::Lmvdrf, FilterKind::Lckf]).unwrap();
    for f in &report.filters {
        for s in &f.steps {
            for i in 0..2 {
                let (emp, theo) = (s.empirical_covariance[i][i], s.theoretical_covariance[i][i]);
                assert!((emp - theo).abs() <= 0.05 * theo, "{} step {} ({emp} vs {theo})", f.filter, s.step);
            }
            assert!(s.bias_within_bound);
            assert!(s.constraint_residual <= s.constraint_tolerance);
        }
    }
}

#[test]
fn report_layout_follows_the_schedule() {
    let mut scenario = reference_scenario();
    scenario.trials = 10;
    let report = run_trials(&scenario).unwrap();
    assert_eq!(report.steps.len(), 10);
    assert_eq!(report.constraint_dims[1], [6, 0]);
    assert_eq!(report.constraint_dims[2], [9, 1]);
    assert_eq!(report.constraint_dims[5], [18, 2]);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 11);
}

#[test]
fn validation_passes_on_a_standard_model() {
    let v = validate_scenario(&reference_scenario()).unwrap();
    assert!(v.passed(), "{v:?}");
    let mut lmvdrf = reference_scenario();
    lmvdrf.filter = FilterKind::Lmvdrf;
    lmvdrf.init = Start::Fisher;
    assert_eq!(validate_scenario(&lmvdrf).unwrap().row("recursion_vs_batch").unwrap().status, CheckStatus::Pass);
}

#[test]
fn validation_flags_violated_conditions_and_skips_equivalence() {
    let mut scenario = reference_scenario();
    let cov = Mat::identity(2, 3) * 0.02;
    scenario.model.extra_cross.push(CrossCovariance { left: NoiseTerm::W(2), right: NoiseTerm::V(2), cov });
    let v = validate_scenario(&scenario).unwrap();
    assert!(!v.passed());
    assert_eq!(v.row("uncorrelation_conditions").unwrap().status, CheckStatus::Fail);
    assert_eq!(v.row("recursion_vs_batch").unwrap().status, CheckStatus::Skipped);
}

#[test]
fn static_regime_is_required_for_lcmve() {
    let scenario = Scenario::new("dynamic", reference_scenario().model, FilterKind::Lcmve);
    assert!(matches!(run_trials(&scenario), Err(lckf_core::Error::Regime(_))));
    let mut r = rng(1);
    let mut s = Scenario::new("static", random_static_model(&mut r, 2, 3, 4), FilterKind::Lcmve);
    s.trials = 50;
    assert_eq!(run_trials(&s).unwrap().steps.len(), 4);
}
