//! Achievable output variance of a PI/P cascade.
//!
//! Outer controller `(k4 + k5 q^-1) / (1 - q^-1)`, inner controller `k6`.
//! With `A = I + k6 G2`, `W = k6 (k4 + k5 F) G1 A^-1 S2`:
//!
//! ```text
//! phi1 = (I + W)^-1 n1
//! phi2 = (I + W)^-1 G1 A^-1 n2
//! var  = phi1'phi1 s1^2 + phi2'phi2 s2^2 + 2 phi1'phi2 s1 s2
//! ```
//!
//! `G1`, `G2` are impulse-response operators and `S2` the inner step
//! response, all with zero diagonal.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{self, DiscreteTransferFunction, ImpulseSeq};
use crate::report::{AssessmentReport, LoopKind};
use crate::tlbo::{Objective, TlboConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
}

impl CascadeParams {
    pub fn new(k4: f64, k5: f64, k6: f64) -> Self {
        Self { k4, k5, k6 }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.k4, self.k5, self.k6]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeProblem {
    pub outer: DiscreteTransferFunction,
    pub inner: DiscreteTransferFunction,
    pub outer_disturbance: DiscreteTransferFunction,
    pub inner_disturbance: DiscreteTransferFunction,
    /// `(sigma_a1^2, sigma_a2^2)`
    pub noise_variances: (f64, f64),
    pub truncation: usize,
}

impl CascadeProblem {
    /// Builds a problem with `p = 8 (d1 + d2)`.
    pub fn new(
        outer: DiscreteTransferFunction,
        inner: DiscreteTransferFunction,
        outer_disturbance: DiscreteTransferFunction,
        inner_disturbance: DiscreteTransferFunction,
        noise_variances: (f64, f64),
    ) -> Result<Self> {
        let p = 8 * (outer.delay() + inner.delay());
        Self::with_truncation(
            outer,
            inner,
            outer_disturbance,
            inner_disturbance,
            noise_variances,
            p,
        )
    }

    pub fn with_truncation(
        outer: DiscreteTransferFunction,
        inner: DiscreteTransferFunction,
        outer_disturbance: DiscreteTransferFunction,
        inner_disturbance: DiscreteTransferFunction,
        noise_variances: (f64, f64),
        truncation: usize,
    ) -> Result<Self> {
        let p = Self {
            outer,
            inner,
            outer_disturbance,
            inner_disturbance,
            noise_variances,
            truncation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (d1, d2) = (self.outer.delay(), self.inner.delay());
        if d1 < 1 || d2 < 1 {
            return Err(Error::InvalidProblem(format!(
                "outer and inner dead times must be at least one sample, got {d1} and {d2}"
            )));
        }
        if self.truncation < d1 + d2 {
            return Err(Error::InvalidProblem(format!(
                "truncation p = {} is shorter than the combined dead time {}",
                self.truncation,
                d1 + d2
            )));
        }
        let (v1, v2) = self.noise_variances;
        for v in [v1, v2] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "noise variances must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn sigmas(&self) -> (f64, f64) {
        (self.noise_variances.0.sqrt(), self.noise_variances.1.sqrt())
    }

    pub fn operators(&self) -> CascadeOperators {
        CascadeOperators::new(self, self.truncation)
    }
}

#[derive(Debug, Clone)]
pub struct CascadeOperators {
    g1: Vec<f64>,
    g2: Vec<f64>,
    s2: Vec<f64>,
    n1: Vec<f64>,
    n2: Vec<f64>,
}

impl CascadeOperators {
    pub fn new(problem: &CascadeProblem, len: usize) -> Self {
        let n = len.max(1) - 1;
        Self {
            g1: problem.outer.impulse_response(n).into_coeffs(),
            g2: problem.inner.impulse_response(n).into_coeffs(),
            s2: problem.inner.step_response(n).into_coeffs(),
            n1: problem.outer_disturbance.impulse_response(n).into_coeffs(),
            n2: problem.inner_disturbance.impulse_response(n).into_coeffs(),
        }
    }

    pub fn len(&self) -> usize {
        self.n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n1.is_empty()
    }

    /// `(phi1, phi2)` as plain vectors.
    pub fn responses(&self, k: &CascadeParams) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        // A = I + k6 G2
        let mut a: Vec<f64> = self.g2.iter().map(|g| k.k6 * g).collect();
        a[0] += 1.0;
        // G1 A^-1, the operators commute
        let g1_ainv = lti::solve_unit(&a, &self.g1);
        let c = lti::conv_trunc(&g1_ainv, &self.s2);
        let fc = lti::shift(&c, 1);
        let mut iw = vec![0.0; n];
        for i in 0..n {
            iw[i] = k.k6 * (k.k4 * c[i] + k.k5 * fc[i]);
        }
        iw[0] += 1.0;
        let phi1 = lti::solve_unit(&iw, &self.n1);
        let phi2 = lti::solve_unit(&iw, &lti::conv_trunc(&g1_ainv, &self.n2));
        (phi1, phi2)
    }
}

pub fn cascade_impulse(problem: &CascadeProblem, k: &CascadeParams) -> (ImpulseSeq, ImpulseSeq) {
    let (phi1, phi2) = problem.operators().responses(k);
    (
        ImpulseSeq::impulse(phi1).expect("non-empty"),
        ImpulseSeq::impulse(phi2).expect("non-empty"),
    )
}

/// Output variance including the `2 phi1'phi2 s1 s2` cross term. `sigma1`
/// and `sigma2` are standard deviations.
pub fn cascade_variance(
    phi1: &ImpulseSeq,
    phi2: &ImpulseSeq,
    sigma1: f64,
    sigma2: f64,
) -> Result<f64> {
    if phi1.len() != phi2.len() {
        return Err(Error::LengthMismatch {
            left: phi1.len(),
            right: phi2.len(),
        });
    }
    if !(sigma1 >= 0.0 && sigma2 >= 0.0) {
        return Err(Error::InvalidProblem(
            "noise standard deviations must be non-negative".into(),
        ));
    }
    Ok(variance_terms(phi1.coeffs(), phi2.coeffs(), sigma1, sigma2).full())
}

/// The three terms of the cascade variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerms {
    pub outer: f64,
    pub inner: f64,
    pub cross: f64,
}

impl VarianceTerms {
    pub fn full(&self) -> f64 {
        self.outer + self.inner + self.cross
    }

    /// Value for independent shocks, where the cross covariance vanishes.
    pub fn independent(&self) -> f64 {
        self.outer + self.inner
    }
}

pub fn variance_terms(phi1: &[f64], phi2: &[f64], sigma1: f64, sigma2: f64) -> VarianceTerms {
    VarianceTerms {
        outer: lti::dot(phi1, phi1) * sigma1 * sigma1,
        inner: lti::dot(phi2, phi2) * sigma2 * sigma2,
        cross: 2.0 * lti::dot(phi1, phi2) * sigma1 * sigma2,
    }
}

/// Inner loop `A2 + q^-d2 k6 B2` and outer loop
/// `(1 - q^-1) A1 (A2 + q^-d2 k6 B2) + q^-(d1+d2) k6 B1 B2 (k4 + k5 q^-1)`
/// both have every root inside the unit circle.
pub fn pip_loop_stable(
    outer: &DiscreteTransferFunction,
    inner: &DiscreteTransferFunction,
    k: &CascadeParams,
) -> bool {
    let k6b2: Vec<f64> = inner.num().iter().map(|b| k.k6 * b).collect();
    let inner_poly = lti::poly_add_shifted(inner.den(), &k6b2, inner.delay());
    if !lti::is_schur_stable(&inner_poly) {
        return false;
    }
    let open = lti::poly_mul(&lti::poly_mul(&[1.0, -1.0], outer.den()), &inner_poly);
    let fb = lti::poly_mul(&lti::poly_mul(outer.num(), &k6b2), &[k.k4, k.k5]);
    lti::is_schur_stable(&lti::poly_add_shifted(&open, &fb, outer.delay() + inner.delay()))
}

#[derive(Debug)]
pub struct CascadeObjective {
    ops: CascadeOperators,
    outer: DiscreteTransferFunction,
    inner: DiscreteTransferFunction,
    sigmas: (f64, f64),
    evaluations: AtomicUsize,
}

impl CascadeObjective {
    pub fn new(problem: &CascadeProblem) -> Self {
        Self::with_length(problem, problem.truncation)
    }

    pub fn with_length(problem: &CascadeProblem, len: usize) -> Self {
        Self {
            ops: CascadeOperators::new(problem, len),
            outer: problem.outer.clone(),
            inner: problem.inner.clone(),
            sigmas: problem.sigmas(),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn terms(&self, k: &CascadeParams) -> VarianceTerms {
        let (phi1, phi2) = self.ops.responses(k);
        variance_terms(&phi1, &phi2, self.sigmas.0, self.sigmas.1)
    }

    pub fn value(&self, k: &CascadeParams) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.terms(k).full()
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

/// Non-stabilizing gains are scored by [`lti::unstable_score`].
impl Objective for CascadeObjective {
    fn evaluate(&self, x: &[f64]) -> f64 {
        let k = CascadeParams::from_slice(x);
        if !pip_loop_stable(&self.outer, &self.inner, &k) {
            return lti::unstable_score(self.value(&k));
        }
        self.value(&k)
    }
}

pub fn cascade_objective(problem: &CascadeProblem) -> CascadeObjective {
    CascadeObjective::new(problem)
}

pub fn assess_cascade(
    problem: &CascadeProblem,
    cfg: &TlboConfig,
    runs: usize,
) -> Result<AssessmentReport> {
    problem.validate()?;
    if cfg.dimensions() != 3 {
        return Err(Error::InvalidConfig(format!(
            "PI/P assessment needs 3 dimensions, config has {}",
            cfg.dimensions()
        )));
    }
    let objective = cascade_objective(problem);
    let results = crate::report::run_repeated(&objective, cfg, runs)?;
    let mut report = AssessmentReport::from_runs(LoopKind::Cascade, &results, cfg);
    report.truncation = problem.truncation;
    report.assumptions.push(
        "variance includes the 2*phi1'phi2*s1*s2 term, i.e. fully correlated outer and inner shocks"
            .into(),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64], d: usize) -> DiscreteTransferFunction {
        DiscreteTransferFunction::new(num.to_vec(), den.to_vec(), d).unwrap()
    }

    fn plant() -> CascadeProblem {
        CascadeProblem::new(
            tf(&[0.04292], &[1.0, -0.9575], 7),
            tf(&[-0.5314], &[1.0, -0.6023], 3),
            tf(&[1.0], &[1.0, -0.9575], 0),
            tf(&[1.0], &[1.0, -0.6023], 0),
            (5e-5, 5e-4),
        )
        .unwrap()
    }

    #[test]
    fn open_loops() {
        let p = plant();
        let (phi1, phi2) = cascade_impulse(&p, &CascadeParams::new(0.0, 0.0, 0.0));
        let n = p.truncation - 1;
        let n1 = p.outer_disturbance.impulse_response(n);
        let g1 = p.outer.impulse_response(n);
        let n2 = p.inner_disturbance.impulse_response(n);
        assert_eq!(phi1.coeffs(), n1.coeffs());
        assert_eq!(phi2.coeffs(), lti::series_mul(&g1, &n2).unwrap().coeffs());
    }

    #[test]
    fn outer_open_inner_closed() {
        let p = plant();
        let k6 = -0.7;
        let (phi1, phi2) = cascade_impulse(&p, &CascadeParams::new(0.0, 0.0, k6));
        let n = p.truncation - 1;
        assert_eq!(phi1.coeffs(), p.outer_disturbance.impulse_response(n).coeffs());
        let mut a = p.inner.impulse_response(n).into_coeffs();
        a.iter_mut().for_each(|v| *v *= k6);
        a[0] += 1.0;
        let a = ImpulseSeq::impulse(a).unwrap();
        let inner = lti::series_solve(&a, &p.inner_disturbance.impulse_response(n)).unwrap();
        let expected = lti::series_mul(&p.outer.impulse_response(n), &inner).unwrap();
        for (x, y) in phi2.coeffs().iter().zip(expected.coeffs()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn variance_examples() {
        let s = |v: &[f64]| ImpulseSeq::impulse(v.to_vec()).unwrap();
        assert_eq!(
            cascade_variance(&s(&[1.0, 2.0]), &s(&[0.0, 0.0]), 0.5, 3.0).unwrap(),
            5.0 * 0.25
        );
        assert_eq!(
            cascade_variance(&s(&[1.0, 0.0]), &s(&[0.0, 1.0]), 1.0, 1.0).unwrap(),
            2.0
        );
        assert_eq!(
            cascade_variance(&s(&[1.0, 1.0]), &s(&[1.0, -1.0]), 1.0, 2.0).unwrap(),
            10.0
        );
        assert!(cascade_variance(&s(&[1.0]), &s(&[1.0, 1.0]), 1.0, 1.0).is_err());
    }

    #[test]
    fn feedback_invariance_of_first_sample() {
        let p = plant();
        for k in [[1.0, -2.0, 0.5], [-3.0, 4.0, -1.0], [2.7638, -2.6554, -0.8436]] {
            let (phi1, _) = cascade_impulse(&p, &CascadeParams::from_slice(&k));
            assert_eq!(phi1.coeffs()[0], 1.0);
        }
    }

    #[test]
    fn invalid_problem() {
        let p = plant();
        assert!(CascadeProblem::with_truncation(
            p.outer.with_delay(0),
            p.inner.clone(),
            p.outer_disturbance.clone(),
            p.inner_disturbance.clone(),
            (1.0, 1.0),
            40
        )
        .is_err());
        assert!(CascadeProblem::with_truncation(
            p.outer.clone(),
            p.inner.clone(),
            p.outer_disturbance.clone(),
            p.inner_disturbance.clone(),
            (1.0, 1.0),
            9
        )
        .is_err());
    }

    #[test]
    fn slow_divergence_is_not_a_minimum() {
        let p = plant();
        let f = cascade_objective(&p);
        // integral gain k4 + k5 slightly negative: tiny truncated variance,
        // but the loop drifts away
        let drifting = [2.9187, -2.9276, -1.0098];
        let settled = [2.8329108295782124, -2.8329102296517736, -1.0158092415348488];
        let kd = CascadeParams::from_slice(&drifting);
        assert!(!pip_loop_stable(&p.outer, &p.inner, &kd));
        assert!(f.value(&kd) < f.evaluate(&settled));
        assert!(f.evaluate(&drifting) >= 1e100);
        assert!(f.evaluate(&settled) < 5e-4);
        // inner loop alone unstable
        assert!(!pip_loop_stable(&p.outer, &p.inner, &CascadeParams::new(0.0, 0.0, -5.0)));
    }
}
