use pidperf::bench::{load_benchmark, load_case_study, reference, CaseStudy, IMMERSION_ROWS};
use pidperf::mc::{
    mc_variance_cascade, mc_variance_single, validate_cascade, validate_single, CorrelationMode,
    McConfig,
};
use pidperf::tuning::LoopModel;
use pidperf::{CascadeParams, CascadeProblem, Error, ReducedPidParams};

fn immersion() -> CascadeProblem {
    match load_case_study(CaseStudy::ImmersionCascade).plant {
        LoopModel::Cascade(p) => p,
        LoopModel::Single(_) => unreachable!(),
    }
}

fn ex1_params() -> ReducedPidParams {
    let r = reference(1).unwrap().params;
    ReducedPidParams::new(r[0], r[1], r[2])
}

#[test]
fn standard_error_shrinks_like_inverse_sqrt() {
    let p = load_benchmark(1).unwrap();
    let k = ex1_params();
    let small = mc_variance_single(&p, &k, &McConfig::new(50_000, 3)).unwrap();
    let large = mc_variance_single(&p, &k, &McConfig::new(800_000, 3)).unwrap();
    let ratio = small.standard_error / large.standard_error;
    // 16x the samples, so about 4x smaller
    assert!((2.5..6.0).contains(&ratio), "ratio {ratio}");
    assert!((small.variance - large.variance).abs() < 5.0 * small.standard_error);
}

#[test]
fn seeded_estimates_repeat() {
    let p = load_benchmark(8).unwrap();
    let k = ReducedPidParams::new(6.5338, -9.2379, 3.3583);
    let cfg = McConfig::new(20_000, 42);
    assert_eq!(mc_variance_single(&p, &k, &cfg).unwrap(), mc_variance_single(&p, &k, &cfg).unwrap());
    let other = mc_variance_single(&p, &k, &McConfig::new(20_000, 43)).unwrap();
    assert_ne!(other.variance, mc_variance_single(&p, &k, &cfg).unwrap().variance);
}

#[test]
fn independent_mode_matches_cross_term_free_variance() {
    let p = immersion();
    let r = IMMERSION_ROWS[1].params;
    let k = CascadeParams::new(r[0], r[1], r[2]);
    let cfg = McConfig::new(400_000, 11).with_mode(CorrelationMode::Independent);
    let v = validate_cascade(&p, &k, &cfg).unwrap();
    assert_eq!(v.mode, Some(CorrelationMode::Independent));
    assert!(v.relative_error < 0.03, "{v:?}");
    let full = validate_cascade(&p, &k, &McConfig::new(400_000, 11)).unwrap();
    // the two modes target different analytic values
    assert!(full.analytic > v.analytic);
    assert!(full.relative_error < 0.03, "{full:?}");
}

#[test]
fn single_validation_within_a_few_standard_errors() {
    for id in [4, 7, 10] {
        let p = load_benchmark(id).unwrap();
        let r = reference(id).unwrap().params;
        let v = validate_single(&p, &ReducedPidParams::new(r[0], r[1], r[2]), &McConfig::new(300_000, id as u64)).unwrap();
        assert!(
            (v.estimate - v.analytic).abs() < 5.0 * v.standard_error + 0.005 * v.analytic,
            "example {id}: {v:?}"
        );
    }
}

#[test]
fn unstable_parameters_are_rejected() {
    let p = load_benchmark(1).unwrap();
    let err = mc_variance_single(&p, &ReducedPidParams::new(40.0, 0.0, 0.0), &McConfig::new(10_000, 1)).unwrap_err();
    assert!(matches!(err, Error::Unstable(_)), "{err:?}");
    let c = immersion();
    let err = mc_variance_cascade(&c, &CascadeParams::new(40.0, 0.0, -5.0), &McConfig::new(10_000, 1)).unwrap_err();
    assert!(matches!(err, Error::Unstable(_)), "{err:?}");
}

#[test]
fn bad_configs() {
    let p = load_benchmark(1).unwrap();
    let mut cfg = McConfig::new(1000, 1);
    cfg.burn_in = 1000;
    assert!(mc_variance_single(&p, &ex1_params(), &cfg).is_err());
    assert!(mc_variance_single(&p, &ex1_params(), &McConfig::new(0, 1)).is_err());
}
