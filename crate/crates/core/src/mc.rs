//! Monte-Carlo estimate of closed-loop output variance.
//!
//! The stochastic loop is simulated directly as difference equations driven
//! by Gaussian white noise, without touching the series algebra, so it can
//! serve as an independent check of the analytic variance formulas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeObjective, CascadeParams, CascadeProblem};
use crate::error::{Error, Result};
use crate::loops::{CascadeLoop, SingleLoop};
use crate::lti::LtiFilter;
use crate::single::{ReducedPidParams, SingleLoopOperators, SingleLoopProblem};

const BATCHES: usize = 50;
const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// `a1` and `a2` drawn independently.
    Independent,
    /// `a2(t) = (sigma2 / sigma1) a1(t)`.
    FullyCorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub correlation_mode: CorrelationMode,
}

impl McConfig {
    /// `burn_in = samples / 10`, fully correlated cascade shocks.
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            burn_in: samples / 10,
            seed,
            correlation_mode: CorrelationMode::FullyCorrelated,
        }
    }

    pub fn with_mode(mut self, mode: CorrelationMode) -> Self {
        self.correlation_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "samples ({}) must exceed burn_in ({})",
                self.samples, self.burn_in
            )));
        }
        if self.samples - self.burn_in < 2 * BATCHES {
            return Err(Error::InvalidConfig(format!(
                "need at least {} retained samples",
                2 * BATCHES
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub variance: f64,
    /// Batch-means standard error of `variance`.
    pub standard_error: f64,
    pub samples_used: usize,
}

/// Mergeable running mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }

    fn variance(&self) -> f64 {
        if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

/// Collects retained samples into equal batches.
struct BatchEstimator {
    batch_len: usize,
    current: Moments,
    batches: Vec<Moments>,
}

impl BatchEstimator {
    fn new(retained: usize) -> Self {
        Self {
            batch_len: retained / BATCHES,
            current: Moments::default(),
            batches: Vec::with_capacity(BATCHES),
        }
    }

    fn push(&mut self, x: f64) {
        if self.batches.len() == BATCHES {
            return;
        }
        self.current.push(x);
        if self.current.n as usize == self.batch_len {
            self.batches.push(self.current);
            self.current = Moments::default();
        }
    }

    fn finish(self) -> McEstimate {
        let all = self
            .batches
            .iter()
            .copied()
            .fold(Moments::default(), Moments::merge);
        let vars: Vec<f64> = self.batches.iter().map(Moments::variance).collect();
        let b = vars.len() as f64;
        let mean_v = vars.iter().sum::<f64>() / b;
        let spread = vars.iter().map(|v| (v - mean_v).powi(2)).sum::<f64>() / (b - 1.0);
        McEstimate {
            variance: all.variance(),
            standard_error: (spread / b).sqrt(),
            samples_used: all.n as usize,
        }
    }
}

/// Rejects controllers whose impulse response has not decayed: the last
/// quarter must stay below half of the overall peak.
fn check_decay(phi: &[f64]) -> Result<()> {
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable("closed-loop impulse response overflowed".into()));
    }
    let peak = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail_start = phi.len() - phi.len() / 4;
    let tail = phi[tail_start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 && tail > 0.5 * peak {
        return Err(Error::Unstable(format!(
            "closed-loop impulse response does not decay within {} samples",
            phi.len()
        )));
    }
    Ok(())
}

fn diverged(t: usize, y: f64) -> Error {
    Error::Unstable(format!("output diverged at sample {t} (y = {y:e})"))
}

pub fn mc_variance_single(
    problem: &SingleLoopProblem,
    k: &ReducedPidParams,
    cfg: &McConfig,
) -> Result<McEstimate> {
    problem.validate()?;
    cfg.validate()?;
    let check_len = (16 * problem.delay()).max(problem.truncation);
    check_decay(&SingleLoopOperators::new(problem, check_len).closed_loop(k))?;

    let sigma = problem.noise_variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dist = LtiFilter::new(&problem.disturbance);
    let mut lp = SingleLoop::new(&problem.process, *k)?;
    let mut est = BatchEstimator::new(cfg.samples - cfg.burn_in);
    for t in 0..cfg.samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        let y = lp.step(0.0, dist.step(sigma * z)).output;
        if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
            return Err(diverged(t, y));
        }
        if t >= cfg.burn_in {
            est.push(y);
        }
    }
    Ok(est.finish())
}

pub fn mc_variance_cascade(
    problem: &CascadeProblem,
    k: &CascadeParams,
    cfg: &McConfig,
) -> Result<McEstimate> {
    problem.validate()?;
    cfg.validate()?;
    let check_len = (16 * (problem.outer.delay() + problem.inner.delay())).max(problem.truncation);
    let ops = crate::cascade::CascadeOperators::new(problem, check_len);
    let (phi1, phi2) = ops.responses(k);
    check_decay(&phi1)?;
    check_decay(&phi2)?;

    let (s1, s2) = problem.sigmas();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d1 = LtiFilter::new(&problem.outer_disturbance);
    let mut d2 = LtiFilter::new(&problem.inner_disturbance);
    let mut lp = CascadeLoop::new(&problem.outer, &problem.inner, *k)?;
    let mut est = BatchEstimator::new(cfg.samples - cfg.burn_in);
    for t in 0..cfg.samples {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let (a1, a2) = match cfg.correlation_mode {
            CorrelationMode::FullyCorrelated => (s1 * z1, s2 * z1),
            CorrelationMode::Independent => {
                let z2: f64 = StandardNormal.sample(&mut rng);
                (s1 * z1, s2 * z2)
            }
        };
        let y = lp.step(0.0, d1.step(a1), d2.step(a2)).output;
        if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
            return Err(diverged(t, y));
        }
        if t >= cfg.burn_in {
            est.push(y);
        }
    }
    Ok(est.finish())
}

/// Analytic-versus-simulated comparison attached to reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationBlock {
    pub mode: Option<CorrelationMode>,
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub estimate: f64,
    pub standard_error: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

impl ValidationBlock {
    fn new(mode: Option<CorrelationMode>, cfg: &McConfig, est: McEstimate, analytic: f64) -> Self {
        Self {
            mode,
            samples: cfg.samples,
            burn_in: cfg.burn_in,
            seed: cfg.seed,
            estimate: est.variance,
            standard_error: est.standard_error,
            analytic,
            relative_error: (est.variance - analytic).abs() / analytic.abs(),
        }
    }
}

pub fn validate_single(
    problem: &SingleLoopProblem,
    k: &ReducedPidParams,
    cfg: &McConfig,
) -> Result<ValidationBlock> {
    let est = mc_variance_single(problem, k, cfg)?;
    let analytic = crate::single::cpa_objective(problem).value(k);
    Ok(ValidationBlock::new(None, cfg, est, analytic))
}

/// Compares against the full variance (with cross term) in fully
/// correlated mode and against the cross-term-free variance otherwise.
pub fn validate_cascade(
    problem: &CascadeProblem,
    k: &CascadeParams,
    cfg: &McConfig,
) -> Result<ValidationBlock> {
    let est = mc_variance_cascade(problem, k, cfg)?;
    let terms = CascadeObjective::new(problem).terms(k);
    let analytic = match cfg.correlation_mode {
        CorrelationMode::FullyCorrelated => terms.full(),
        CorrelationMode::Independent => terms.independent(),
    };
    Ok(ValidationBlock::new(
        Some(cfg.correlation_mode),
        cfg,
        est,
        analytic,
    ))
}
