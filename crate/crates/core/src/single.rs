//! Achievable output variance of a single loop under a PID controller
//! `(k1 + k2 q^-1 + k3 q^-2) / (1 - q^-1)`.
//!
//! With only the initial shock `a(0)` acting, the output sequence obeys
//!
//! ```text
//! (I + k1 S + k2 F S + k3 F^2 S) y = n a(0)
//! ```
//!
//! where `n` is the disturbance impulse response, `F` the one-step shift
//! and `S` the lower-triangular Toeplitz operator of the process seen
//! through the controller integrator, i.e. the process step response.
//! Because the process has at least one sample of dead time the diagonal
//! of `S` is zero and the system matrix is unit lower triangular.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{self, DiscreteTransferFunction, ImpulseSeq};
use crate::report::{AssessmentReport, LoopKind};
use crate::tlbo::{Objective, TlboConfig};

/// Textbook PID gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Velocity-form PID coefficients: `k1 = kp + ki + kd`, `k2 = -(kp + 2 kd)`,
/// `k3 = kd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPidParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl ReducedPidParams {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Self {
        Self { k1, k2, k3 }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl From<PidGains> for ReducedPidParams {
    fn from(g: PidGains) -> Self {
        Self {
            k1: g.kp + g.ki + g.kd,
            k2: -(g.kp + 2.0 * g.kd),
            k3: g.kd,
        }
    }
}

impl From<ReducedPidParams> for PidGains {
    fn from(k: ReducedPidParams) -> Self {
        let kd = k.k3;
        let kp = -k.k2 - 2.0 * kd;
        Self {
            kp,
            ki: k.k1 + k.k2 + k.k3,
            kd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLoopProblem {
    pub process: DiscreteTransferFunction,
    pub disturbance: DiscreteTransferFunction,
    pub noise_variance: f64,
    /// Length `p` of the truncated closed-loop impulse response.
    pub truncation: usize,
}

impl SingleLoopProblem {
    /// Builds a problem with `p = 8 d`.
    pub fn new(
        process: DiscreteTransferFunction,
        disturbance: DiscreteTransferFunction,
        noise_variance: f64,
    ) -> Result<Self> {
        let p = 8 * process.delay();
        Self::with_truncation(process, disturbance, noise_variance, p)
    }

    pub fn with_truncation(
        process: DiscreteTransferFunction,
        disturbance: DiscreteTransferFunction,
        noise_variance: f64,
        truncation: usize,
    ) -> Result<Self> {
        let problem = Self {
            process,
            disturbance,
            noise_variance,
            truncation,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.process.delay();
        if d < 1 {
            return Err(Error::InvalidProblem(
                "process dead time must be at least one sample".into(),
            ));
        }
        if self.truncation < d {
            return Err(Error::InvalidProblem(format!(
                "truncation p = {} is shorter than the process dead time d = {d}",
                self.truncation
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn delay(&self) -> usize {
        self.process.delay()
    }

    pub fn operators(&self) -> SingleLoopOperators {
        SingleLoopOperators::new(self, self.truncation)
    }
}

/// Precomputed first columns for a fixed problem and length.
#[derive(Debug, Clone)]
pub struct SingleLoopOperators {
    /// Process step response, `s(0) = 0`.
    process_step: Vec<f64>,
    disturbance: Vec<f64>,
}

impl SingleLoopOperators {
    pub fn new(problem: &SingleLoopProblem, len: usize) -> Self {
        let n = len.max(1) - 1;
        Self {
            process_step: problem.process.step_response(n).into_coeffs(),
            disturbance: problem.disturbance.impulse_response(n).into_coeffs(),
        }
    }

    pub fn len(&self) -> usize {
        self.disturbance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disturbance.is_empty()
    }

    /// First column of `I + k1 S + k2 F S + k3 F^2 S`.
    pub fn system(&self, k: &ReducedPidParams) -> Vec<f64> {
        let s = &self.process_step;
        let mut a = vec![0.0; s.len()];
        a[0] = 1.0;
        for i in 0..s.len() {
            let mut v = k.k1 * s[i];
            if i >= 1 {
                v += k.k2 * s[i - 1];
            }
            if i >= 2 {
                v += k.k3 * s[i - 2];
            }
            a[i] += v;
        }
        a
    }

    pub fn closed_loop(&self, k: &ReducedPidParams) -> Vec<f64> {
        lti::solve_unit(&self.system(k), &self.disturbance)
    }
}

/// Truncated closed-loop impulse response `phi(0..p)`.
/// Every root of the closed-loop characteristic polynomial
/// `(1 - q^-1) A + q^-d B (k1 + k2 q^-1 + k3 q^-2)` lies inside the unit circle.
pub fn pid_loop_stable(process: &DiscreteTransferFunction, k: &ReducedPidParams) -> bool {
    let open = lti::poly_mul(&[1.0, -1.0], process.den());
    let fb = lti::poly_mul(process.num(), &k.to_array());
    lti::is_schur_stable(&lti::poly_add_shifted(&open, &fb, process.delay()))
}

pub fn closed_loop_impulse(problem: &SingleLoopProblem, k: &ReducedPidParams) -> ImpulseSeq {
    ImpulseSeq::impulse(problem.operators().closed_loop(k)).expect("p >= d >= 1")
}

/// `phi' phi * sigma^2`
pub fn output_variance(phi: &ImpulseSeq, noise_variance: f64) -> Result<f64> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    Ok(phi.energy() * noise_variance)
}

/// Variance floor set by the first `d` disturbance impulse coefficients,
/// which no feedback controller can influence.
pub fn mv_benchmark(problem: &SingleLoopProblem) -> f64 {
    let d = problem.delay();
    let head = problem.disturbance.impulse_response(d - 1);
    head.energy() * problem.noise_variance
}

/// Truncated output variance as a function of `(k1, k2, k3)`.
#[derive(Debug)]
pub struct CpaObjective {
    ops: SingleLoopOperators,
    process: DiscreteTransferFunction,
    noise_variance: f64,
    evaluations: AtomicUsize,
}

impl CpaObjective {
    pub fn new(problem: &SingleLoopProblem) -> Self {
        Self::with_length(problem, problem.truncation)
    }

    /// Same objective truncated at an arbitrary length.
    pub fn with_length(problem: &SingleLoopProblem, len: usize) -> Self {
        Self {
            ops: SingleLoopOperators::new(problem, len),
            process: problem.process.clone(),
            noise_variance: problem.noise_variance,
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn value(&self, k: &ReducedPidParams) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let phi = self.ops.closed_loop(k);
        lti::dot(&phi, &phi) * self.noise_variance
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

/// The truncated variance alone cannot see a slow divergence, so gains that
/// do not stabilize the loop are scored by [`lti::unstable_score`].
impl Objective for CpaObjective {
    fn evaluate(&self, x: &[f64]) -> f64 {
        let k = ReducedPidParams::from_slice(x);
        if !pid_loop_stable(&self.process, &k) {
            return lti::unstable_score(self.value(&k));
        }
        self.value(&k)
    }
}

pub fn cpa_objective(problem: &SingleLoopProblem) -> CpaObjective {
    CpaObjective::new(problem)
}

/// Runs `runs` independent seeded optimizations of the truncated output
/// variance and summarizes them.
pub fn assess_single(
    problem: &SingleLoopProblem,
    cfg: &TlboConfig,
    runs: usize,
) -> Result<AssessmentReport> {
    problem.validate()?;
    if cfg.dimensions() != 3 {
        return Err(Error::InvalidConfig(format!(
            "PID assessment needs 3 dimensions, config has {}",
            cfg.dimensions()
        )));
    }
    let objective = cpa_objective(problem);
    let results = crate::report::run_repeated(&objective, cfg, runs)?;
    let mut report = AssessmentReport::from_runs(LoopKind::Single, &results, cfg);
    let mv = mv_benchmark(problem);
    report.mv = Some(mv);
    report.performance_index = Some(if report.mov.best > 0.0 {
        mv / report.mov.best
    } else {
        1.0
    });
    report.truncation = problem.truncation;
    report.assumptions.push(
        "output variance truncated to the first p closed-loop impulse coefficients".into(),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64], d: usize) -> DiscreteTransferFunction {
        DiscreteTransferFunction::new(num.to_vec(), den.to_vec(), d).unwrap()
    }

    fn example8() -> SingleLoopProblem {
        SingleLoopProblem::new(tf(&[0.1], &[1.0, -0.8], 3), tf(&[1.0], &[1.0, -1.0], 0), 1.0)
            .unwrap()
    }

    #[test]
    fn gains_round_trip() {
        let g = PidGains {
            kp: 1.25,
            ki: -0.5,
            kd: 0.75,
        };
        let k = ReducedPidParams::from(g);
        assert_eq!(k, ReducedPidParams::new(1.5, -2.75, 0.75));
        assert_eq!(PidGains::from(k), g);
    }

    #[test]
    fn open_loop_is_disturbance() {
        let p = example8();
        let phi = closed_loop_impulse(&p, &ReducedPidParams::new(0.0, 0.0, 0.0));
        assert_eq!(phi.coeffs(), vec![1.0; 24].as_slice());
        assert_eq!(output_variance(&phi, 1.0).unwrap(), 24.0);
        assert_eq!(cpa_objective(&p).value(&ReducedPidParams::new(0.0, 0.0, 0.0)), 24.0);
    }

    #[test]
    fn output_variance_examples() {
        let phi = ImpulseSeq::impulse(vec![1.0; 3]).unwrap();
        assert_eq!(output_variance(&phi, 1.0).unwrap(), 3.0);
        let z = ImpulseSeq::impulse(vec![0.0; 3]).unwrap();
        assert_eq!(output_variance(&z, 1.0).unwrap(), 0.0);
        assert!(output_variance(&phi, -1.0).is_err());
    }

    #[test]
    fn open_loop_geometric_sum() {
        let p = SingleLoopProblem::new(
            tf(&[0.08919], &[1.0, -0.8669], 12),
            tf(&[0.08919], &[1.0, -0.8669], 0),
            1.0,
        )
        .unwrap();
        let expected: f64 = (0..96).map(|k| 0.08919f64.powi(2) * 0.8669f64.powi(2 * k)).sum();
        let got = cpa_objective(&p).value(&ReducedPidParams::new(0.0, 0.0, 0.0));
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 0.032_013_5).abs() < 1e-7);
    }

    #[test]
    fn mv_of_example8_is_three() {
        assert!((mv_benchmark(&example8()) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_problems() {
        let g0 = tf(&[1.0], &[1.0], 0);
        let gd = tf(&[1.0], &[1.0], 0);
        assert!(SingleLoopProblem::new(g0, gd.clone(), 1.0).is_err());
        let g = tf(&[1.0], &[1.0], 4);
        assert!(SingleLoopProblem::with_truncation(g.clone(), gd.clone(), 1.0, 3).is_err());
        assert!(SingleLoopProblem::new(g, gd, -1.0).is_err());
    }

    #[test]
    fn evaluation_counter() {
        let f = cpa_objective(&example8());
        f.evaluate(&[0.0, 0.0, 0.0]);
        f.evaluate(&[1.0, 0.0, 0.0]);
        assert_eq!(f.evaluations(), 2);
    }

    #[test]
    fn unstable_gains_rank_above_stable() {
        let p = example8();
        let f = cpa_objective(&p);
        let stable = [0.5, -0.4, 0.0];
        assert!(pid_loop_stable(&p.process, &ReducedPidParams::from_slice(&stable)));
        assert_eq!(f.evaluate(&stable), f.value(&ReducedPidParams::from_slice(&stable)));
        // integral gain of the wrong sign
        assert!(!pid_loop_stable(&p.process, &ReducedPidParams::new(1.0, -1.1, 0.0)));
        let mild = f.evaluate(&[12.0, 0.0, 0.0]);
        let wild = f.evaluate(&[40.0, 0.0, 0.0]);
        assert!(mild >= 1e100 && mild < wild, "{mild} {wild}");
    }
}
