mod common;

use std::sync::Mutex;

use common::{filter, matvec, toeplitz};
use pidperf::tlbo::{minimize, OptResult, TlboConfig};
use pidperf::{
    cascade_impulse, cascade_variance, closed_loop_impulse, mv_benchmark, output_variance,
    series_mul, series_solve, CascadeParams, CascadeProblem, DiscreteTransferFunction,
    ImpulseSeq, PidGains, ReducedPidParams, SingleLoopProblem,
};
use proptest::prelude::*;

fn seq(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

fn unit_seq(len: usize) -> impl Strategy<Value = Vec<f64>> {
    seq(len).prop_map(|mut v| {
        v[0] = 1.0;
        v
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn stable_tf(delay: usize) -> impl Strategy<Value = DiscreteTransferFunction> {
    (0.05f64..1.0, -0.9f64..0.9).prop_map(move |(b, a)| {
        DiscreteTransferFunction::new(vec![b], vec![1.0, -a], delay).unwrap()
    })
}

fn single_problem() -> impl Strategy<Value = SingleLoopProblem> {
    (1usize..6, 0.05f64..1.0, -0.9f64..0.9, -0.9f64..0.9, 0.1f64..3.0).prop_map(
        |(d, b, a, c, v)| {
            let g = DiscreteTransferFunction::new(vec![b], vec![1.0, -a], d).unwrap();
            let gd = DiscreteTransferFunction::new(vec![1.0], vec![1.0, -c], 0).unwrap();
            SingleLoopProblem::new(g, gd, v).unwrap()
        },
    )
}

fn pid() -> impl Strategy<Value = ReducedPidParams> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b, c)| ReducedPidParams::new(a, b, c))
}

fn strip_time(mut r: OptResult) -> OptResult {
    r.elapsed = 0.0;
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_mul_matches_toeplitz_product(a in seq(12), b in seq(12)) {
        let prod = series_mul(&ImpulseSeq::impulse(a.clone()).unwrap(), &ImpulseSeq::impulse(b.clone()).unwrap()).unwrap();
        let dense = matvec(&toeplitz(&a), &b);
        prop_assert!(close(prod.coeffs(), &dense, 1e-12));
    }

    #[test]
    fn series_mul_commutes_and_associates(a in seq(10), b in seq(10), c in seq(10)) {
        let (a, b, c) = (ImpulseSeq::impulse(a).unwrap(), ImpulseSeq::impulse(b).unwrap(), ImpulseSeq::impulse(c).unwrap());
        let ab = series_mul(&a, &b).unwrap();
        let ba = series_mul(&b, &a).unwrap();
        prop_assert!(close(ab.coeffs(), ba.coeffs(), 1e-12));
        let l = series_mul(&ab, &c).unwrap();
        let r = series_mul(&a, &series_mul(&b, &c).unwrap()).unwrap();
        prop_assert!(close(l.coeffs(), r.coeffs(), 1e-10));
        let one = ImpulseSeq::identity(10);
        let same = series_mul(&one, &a).unwrap();
        prop_assert_eq!(same.coeffs(), a.coeffs());
    }

    #[test]
    fn series_solve_inverts_mul(a in unit_seq(10), b in seq(10)) {
        let a = ImpulseSeq::impulse(a).unwrap();
        let b = ImpulseSeq::impulse(b).unwrap();
        let x = series_solve(&a, &series_mul(&a, &b).unwrap()).unwrap();
        prop_assert!(close(x.coeffs(), b.coeffs(), 1e-8));
    }

    #[test]
    fn gains_round_trip(kp in -50.0f64..50.0, ki in -50.0f64..50.0, kd in -50.0f64..50.0) {
        let g = PidGains { kp, ki, kd };
        let back = PidGains::from(ReducedPidParams::from(g));
        prop_assert!((back.kp - kp).abs() < 1e-12 && (back.ki - ki).abs() < 1e-12 && back.kd == kd);
    }

    #[test]
    fn impulse_response_matches_recursion(tf in stable_tf(3), n in 1usize..40) {
        let mut x = vec![0.0; n + 1];
        x[0] = 1.0;
        let direct = filter(tf.num(), tf.den(), tf.delay(), &x);
        prop_assert!(close(tf.impulse_response(n).coeffs(), &direct, 1e-13));
        let steps = filter(tf.num(), tf.den(), tf.delay(), &vec![1.0; n + 1]);
        prop_assert!(close(tf.step_response(n).coeffs(), &steps, 1e-12));
    }

    #[test]
    fn feedback_invariance_single(problem in single_problem(), k in pid()) {
        let phi = closed_loop_impulse(&problem, &k);
        let n = problem.disturbance.impulse_response(problem.truncation - 1);
        let d = problem.delay();
        prop_assert_eq!(&phi.coeffs()[..d], &n.coeffs()[..d]);
    }

    #[test]
    fn mv_lower_bounds_variance(problem in single_problem(), k in pid()) {
        let var = output_variance(&closed_loop_impulse(&problem, &k), problem.noise_variance).unwrap();
        prop_assert!(mv_benchmark(&problem) <= var * (1.0 + 1e-12));
    }

    #[test]
    fn feedback_invariance_cascade(
        g1 in stable_tf(2), g2 in stable_tf(1), n1 in stable_tf(0), n2 in stable_tf(0),
        k4 in -3.0f64..3.0, k5 in -3.0f64..3.0, k6 in -3.0f64..3.0,
    ) {
        let problem = CascadeProblem::new(g1, g2, n1.clone(), n2, (1.0, 1.0)).unwrap();
        let (phi1, _) = cascade_impulse(&problem, &CascadeParams::new(k4, k5, k6));
        let head = n1.impulse_response(2).into_coeffs();
        prop_assert!(close(&phi1.coeffs()[..3], &head, 1e-14));
    }

    #[test]
    fn cascade_variance_symmetric(a in seq(8), b in seq(8), s1 in 0.0f64..3.0, s2 in 0.0f64..3.0) {
        let (a, b) = (ImpulseSeq::impulse(a).unwrap(), ImpulseSeq::impulse(b).unwrap());
        let v = cascade_variance(&a, &b, s1, s2).unwrap();
        let w = cascade_variance(&b, &a, s2, s1).unwrap();
        prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        prop_assert!(v >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tlbo_history_monotone_and_counted(seed in any::<u64>(), dim in 1usize..5, np in 2usize..12) {
        let mut cfg = TlboConfig::new(dim).with_seed(seed);
        cfg.population = np;
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2) + v.sin()).sum::<f64>();
        let res = minimize(&f, &cfg).unwrap();
        prop_assert!(res.fitness_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(res.evaluations, np * (1 + res.iterations));
        prop_assert_eq!(res.best_fitness, *res.fitness_history.last().unwrap());
    }

    #[test]
    fn tlbo_stays_in_bounds(seed in any::<u64>(), lo in -5.0f64..0.0, width in 0.1f64..5.0) {
        let mut cfg = TlboConfig::new(3).with_seed(seed).with_bounds(lo, lo + width);
        cfg.max_iterations = 60;
        let seen = Mutex::new(Vec::new());
        // the unconstrained optimum lies outside the box, pushing learners at the walls
        let f = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            x.iter().map(|v| (v - 10.0).powi(2)).sum::<f64>()
        };
        let res = minimize(&f, &cfg).unwrap();
        let seen = seen.into_inner().unwrap();
        prop_assert_eq!(seen.len(), res.evaluations);
        prop_assert!(seen.iter().flatten().all(|v| *v >= lo && *v <= lo + width));
    }

    #[test]
    fn tlbo_seeded_runs_are_identical(seed in any::<u64>()) {
        let cfg = TlboConfig::new(3).with_seed(seed);
        let f = |x: &[f64]| x.iter().map(|v| v * v - (3.0 * v).cos()).sum::<f64>();
        let a = serde_json::to_string(&strip_time(minimize(&f, &cfg).unwrap())).unwrap();
        let b = serde_json::to_string(&strip_time(minimize(&f, &cfg).unwrap())).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn sphere_sanity() {
    for seed in 0..5 {
        let res = minimize(&|x: &[f64]| x.iter().map(|v| v * v).sum(), &TlboConfig::new(4).with_seed(seed)).unwrap();
        assert!(res.best_fitness < 1e-6, "seed {seed}: {}", res.best_fitness);
    }
}
