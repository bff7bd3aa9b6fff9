//! Teaching-learning-based optimization over a box-bounded real vector.
//!
//! Each loop runs a teacher phase followed by a learner phase. Both phases
//! build their candidates from the population as it stood at the start of
//! the phase, then evaluate and apply greedy replacement. The phase counter
//! advances after every phase and the run stops once the teacher fitness
//! has improved by less than `termination_tol` over the last
//! `termination_window` phases.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that maps a point to a scalar cost.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlboConfig {
    pub population: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Window length, counted in phases.
    pub termination_window: usize,
    pub termination_tol: f64,
    /// Hard cap on phases.
    pub max_iterations: usize,
    pub seed: u64,
    /// Draw `r` per learner and per dimension rather than once per learner.
    /// Off by default: a shared `r` keeps every move on the line through the
    /// guiding points, which matters in the narrow stable valleys of the
    /// PID problems.
    pub per_dimension_rand: bool,
}

impl TlboConfig {
    /// Defaults used throughout the assessment work: 20 learners, every
    /// coordinate in `[-50, 50]`, stop after a 20-phase window gains less
    /// than `1e-7`.
    pub fn new(dimensions: usize) -> Self {
        Self {
            population: 20,
            lower: vec![-50.0; dimensions],
            upper: vec![50.0; dimensions],
            termination_window: 20,
            termination_tol: 1e-7,
            max_iterations: 2000,
            seed: 0,
            per_dimension_rand: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        let d = self.dimensions();
        self.lower = vec![lower; d];
        self.upper = vec![upper; d];
        self
    }

    pub fn dimensions(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidConfig("population must be at least 2".into()));
        }
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidConfig(
                "lower and upper bounds must be non-empty and of equal length".into(),
            ));
        }
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "dimension {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.termination_tol > 0.0) {
            return Err(Error::InvalidConfig("termination_tol must be > 0".into()));
        }
        if self.termination_window == 0 {
            return Err(Error::InvalidConfig("termination_window must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
    /// Phases executed.
    pub iterations: usize,
    pub evaluations: usize,
    /// Teacher fitness after initialization and after every phase.
    pub fitness_history: Vec<f64>,
    /// Candidates whose objective returned NaN.
    pub nan_evaluations: usize,
    pub stop_reason: StopReason,
    #[serde(rename = "elapsed_s")]
    pub elapsed: f64,
}

struct Population {
    points: Vec<Vec<f64>>,
    fitness: Vec<f64>,
}

impl Population {
    fn teacher(&self) -> usize {
        // first index wins ties
        let mut best = 0;
        for (i, &f) in self.fitness.iter().enumerate().skip(1) {
            if f < self.fitness[best] {
                best = i;
            }
        }
        best
    }

    fn mean(&self) -> Vec<f64> {
        let d = self.points[0].len();
        let n = self.points.len() as f64;
        let mut m = vec![0.0; d];
        for p in &self.points {
            for (mj, pj) in m.iter_mut().zip(p) {
                *mj += pj;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Greedy replacement; returns nothing, the caller reads the teacher.
    fn accept(&mut self, candidates: Vec<Vec<f64>>, scores: Vec<f64>) {
        for (i, (c, f)) in candidates.into_iter().zip(scores).enumerate() {
            if f < self.fitness[i] {
                self.points[i] = c;
                self.fitness[i] = f;
            }
        }
    }
}

struct Evaluator<'a, O: Objective + ?Sized> {
    objective: &'a O,
    evaluations: usize,
    nan: usize,
}

impl<O: Objective + ?Sized> Evaluator<'_, O> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let f = self.objective.evaluate(x);
        if f.is_nan() {
            self.nan += 1;
            f64::INFINITY
        } else {
            f
        }
    }
}

pub fn minimize<O: Objective + ?Sized>(objective: &O, cfg: &TlboConfig) -> Result<OptResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let np = cfg.population;
    let dim = cfg.dimensions();
    let mut ev = Evaluator {
        objective,
        evaluations: 0,
        nan: 0,
    };

    let points: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            (0..dim)
                .map(|j| cfg.lower[j] + rng.random::<f64>() * (cfg.upper[j] - cfg.lower[j]))
                .collect()
        })
        .collect();
    let fitness = points.iter().map(|p| ev.eval(p)).collect();
    let mut pop = Population { points, fitness };

    let mut history = vec![pop.fitness[pop.teacher()]];
    let mut phase = 0usize;
    let stop_reason = loop {
        if phase >= cfg.termination_window {
            let gain = history[phase - cfg.termination_window] - history[phase];
            if gain < cfg.termination_tol {
                break StopReason::Converged;
            }
        }
        if phase >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }

        // teacher phase
        let teacher = pop.points[pop.teacher()].clone();
        let mean = pop.mean();
        let candidates: Vec<Vec<f64>> = pop
            .points
            .iter()
            .map(|p| {
                let tf = (1.0 + rng.random::<f64>()).round();
                let r_learner = rng.random::<f64>();
                (0..dim)
                    .map(|j| {
                        let r = if cfg.per_dimension_rand {
                            rng.random::<f64>()
                        } else {
                            r_learner
                        };
                        let v = p[j] + r * (teacher[j] - tf * mean[j]);
                        v.clamp(cfg.lower[j], cfg.upper[j])
                    })
                    .collect()
            })
            .collect();
        let scores = candidates.iter().map(|c| ev.eval(c)).collect();
        pop.accept(candidates, scores);
        phase += 1;
        history.push(pop.fitness[pop.teacher()]);

        // learner phase
        let candidates: Vec<Vec<f64>> = (0..np)
            .map(|m| {
                let mut l = rng.random_range(0..np);
                while l == m {
                    l = rng.random_range(0..np);
                }
                let (pm, pl) = (&pop.points[m], &pop.points[l]);
                let toward_self = pop.fitness[m] < pop.fitness[l];
                let r_learner = rng.random::<f64>();
                (0..dim)
                    .map(|j| {
                        let r = if cfg.per_dimension_rand {
                            rng.random::<f64>()
                        } else {
                            r_learner
                        };
                        let step = if toward_self { pm[j] - pl[j] } else { pl[j] - pm[j] };
                        (pm[j] + r * step).clamp(cfg.lower[j], cfg.upper[j])
                    })
                    .collect()
            })
            .collect();
        let scores = candidates.iter().map(|c| ev.eval(c)).collect();
        pop.accept(candidates, scores);
        phase += 1;
        history.push(pop.fitness[pop.teacher()]);
    };

    let best = pop.teacher();
    let best_fitness = pop.fitness[best];
    if !best_fitness.is_finite() {
        return Err(Error::NonFiniteFitness {
            evaluations: ev.evaluations,
        });
    }
    Ok(OptResult {
        best_point: pop.points[best].clone(),
        best_fitness,
        iterations: phase,
        evaluations: ev.evaluations,
        fitness_history: history,
        nan_evaluations: ev.nan,
        stop_reason,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
