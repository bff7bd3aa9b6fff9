//! Explicit matrix constructions of the closed-loop responses.

use super::*;
use pidperf::{
    cascade_impulse, cascade_variance, closed_loop_impulse, output_variance, CascadeParams,
    CascadeProblem, ReducedPidParams, SingleLoopProblem,
};

/// Closed loop counts as stable when its long response has died out.
fn decays(seqs: &[&[f64]]) -> bool {
    seqs.iter().all(|s| {
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = s[s.len() - 50..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        peak.is_finite() && tail < 1e-6 * peak.max(1.0)
    })
}

/// Worst max-abs gap between the series solve and a dense solve over
/// `instances` random closed-loop-stable single loops.
pub fn dense_single_worst(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    while accepted < instances {
        let d = r.random_range(1..=4);
        let p = r.random_range(d..=32);
        let g = random_stable(&mut r, d);
        let gd = random_stable(&mut r, 0);
        let problem = SingleLoopProblem::with_truncation(g.clone(), gd.clone(), 1.0, p).unwrap();
        let k = ReducedPidParams::new(
            r.random_range(-0.5..0.5),
            r.random_range(-0.5..0.5),
            r.random_range(-0.5..0.5),
        );
        let long = SingleLoopProblem::with_truncation(g.clone(), gd.clone(), 1.0, 600).unwrap();
        if !decays(&[closed_loop_impulse(&long, &k).coeffs()]) {
            continue;
        }
        accepted += 1;

        let s = toeplitz(&step(&g, p));
        let f = shift(p);
        let fs = matmul(&f, &s);
        let ffs = matmul(&f, &fs);
        let m = add(
            &add(&identity(p), &scale(&s, k.k1)),
            &add(&scale(&fs, k.k2), &scale(&ffs, k.k3)),
        );
        let n = impulse(&gd, p);
        let phi_dense = solve_vec(&m, &n);

        let phi = closed_loop_impulse(&problem, &k);
        assert_eq!(phi.len(), p);
        let err = max_abs_diff(phi.coeffs(), &phi_dense);
        worst = worst.max(err);

        let var_dense: f64 = phi_dense.iter().map(|v| v * v).sum::<f64>() * 0.7;
        let var = output_variance(&phi, 0.7).unwrap();
        worst = worst.max((var - var_dense).abs() / var_dense.max(1.0));
    }
    worst
}

/// Same for the cascade, both responses and the variance.
pub fn dense_cascade_worst(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    while accepted < instances {
        let d1 = r.random_range(1..=3);
        let d2 = r.random_range(1..=4 - d1);
        let p = r.random_range(d1 + d2..=32);
        let g1 = random_stable(&mut r, d1);
        let g2 = random_stable(&mut r, d2);
        let n1 = random_stable(&mut r, 0);
        let n2 = random_stable(&mut r, 0);
        let (v1, v2) = (r.random_range(0.1..2.0), r.random_range(0.1..2.0));
        let problem = CascadeProblem::with_truncation(
            g1.clone(),
            g2.clone(),
            n1.clone(),
            n2.clone(),
            (v1, v2),
            p,
        )
        .unwrap();
        let k = CascadeParams::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
        );
        let long = CascadeProblem::with_truncation(
            g1.clone(),
            g2.clone(),
            n1.clone(),
            n2.clone(),
            (v1, v2),
            600,
        )
        .unwrap();
        let (l1, l2) = cascade_impulse(&long, &k);
        if !decays(&[l1.coeffs(), l2.coeffs()]) {
            continue;
        }
        accepted += 1;

        let eye = identity(p);
        let g1m = toeplitz(&impulse(&g1, p));
        let g2m = toeplitz(&impulse(&g2, p));
        let s2m = toeplitz(&step(&g2, p));
        let a = add(&eye, &scale(&g2m, k.k6));
        let ainv_s2 = solve(&a, &s2m);
        let pi = add(&scale(&eye, k.k4), &scale(&shift(p), k.k5));
        let w = scale(&matmul(&pi, &matmul(&g1m, &ainv_s2)), k.k6);
        let iw = add(&eye, &w);
        let phi1_dense = solve_vec(&iw, &impulse(&n1, p));
        let ainv_n2 = solve_vec(&a, &impulse(&n2, p));
        let phi2_dense = solve_vec(&iw, &matvec(&g1m, &ainv_n2));

        let (phi1, phi2) = cascade_impulse(&problem, &k);
        let err = max_abs_diff(phi1.coeffs(), &phi1_dense)
            .max(max_abs_diff(phi2.coeffs(), &phi2_dense));
        worst = worst.max(err);

        // quadratic form of the stacked response
        let (s1, s2) = (v1.sqrt(), v2.sqrt());
        let y: Vec<f64> = phi1_dense.iter().zip(&phi2_dense).map(|(a, b)| a * s1 + b * s2).collect();
        let var_dense: f64 = y.iter().map(|v| v * v).sum();
        let var = cascade_variance(&phi1, &phi2, s1, s2).unwrap();
        worst = worst.max((var - var_dense).abs() / var_dense.max(1.0));
    }
    worst
}
