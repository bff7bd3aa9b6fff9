//! Repeated-run statistics and the serializable assessment report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mc::ValidationBlock;
use crate::tlbo::{self, Objective, OptResult, TlboConfig};

/// Seed for run `index` of a batch started from `base`.
pub fn run_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// `runs` independent optimizations with seeds `cfg.seed, cfg.seed + 1, ...`.
/// Results come back in run order regardless of scheduling.
pub fn run_repeated<O: Objective + ?Sized>(
    objective: &O,
    cfg: &TlboConfig,
    runs: usize,
) -> Result<Vec<OptResult>> {
    (0..runs.max(1))
        .into_par_iter()
        .map(|i| {
            let cfg = cfg.clone().with_seed(run_seed(cfg.seed, i));
            tlbo::minimize(objective, &cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean: f64,
    /// Sample standard deviation (zero for a single run).
    pub std: f64,
    pub best: f64,
    pub worst: f64,
}

impl RunStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            best: values.iter().copied().fold(f64::INFINITY, f64::min),
            worst: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Single,
    Cascade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub fitness: f64,
    pub params: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub kind: LoopKind,
    /// Minimum-variance floor; single loop only.
    pub mv: Option<f64>,
    pub mov: RunStats,
    /// `mv / mov.best`
    pub performance_index: Option<f64>,
    pub best_params: Vec<f64>,
    pub param_mean: Vec<f64>,
    pub param_std: Vec<f64>,
    pub mean_time_s: f64,
    pub truncation: usize,
    pub runs: Vec<RunSummary>,
    pub tlbo: TlboConfig,
    pub assumptions: Vec<String>,
    pub validation: Option<ValidationBlock>,
}

impl AssessmentReport {
    pub fn from_runs(kind: LoopKind, results: &[OptResult], cfg: &TlboConfig) -> Self {
        let fitness: Vec<f64> = results.iter().map(|r| r.best_fitness).collect();
        let mov = RunStats::from_values(&fitness);
        let dim = results[0].best_point.len();
        let per_dim: Vec<RunStats> = (0..dim)
            .map(|j| {
                let v: Vec<f64> = results.iter().map(|r| r.best_point[j]).collect();
                RunStats::from_values(&v)
            })
            .collect();
        let best = results
            .iter()
            .min_by(|a, b| a.best_fitness.total_cmp(&b.best_fitness))
            .expect("at least one run");
        let runs = results
            .iter()
            .enumerate()
            .map(|(i, r)| RunSummary {
                seed: run_seed(cfg.seed, i),
                fitness: r.best_fitness,
                params: r.best_point.clone(),
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.stop_reason == tlbo::StopReason::Converged,
                elapsed_s: r.elapsed,
            })
            .collect();
        Self {
            kind,
            mv: None,
            mov,
            performance_index: None,
            best_params: best.best_point.clone(),
            param_mean: per_dim.iter().map(|s| s.mean).collect(),
            param_std: per_dim.iter().map(|s| s.std).collect(),
            mean_time_s: results.iter().map(|r| r.elapsed).sum::<f64>() / results.len() as f64,
            truncation: 0,
            runs,
            tlbo: cfg.clone(),
            assumptions: Vec::new(),
            validation: None,
        }
    }

    pub fn csv_header() -> &'static str {
        "kind,mv,mov_mean,mov_std,mov_worst,mov_best,eta,time_s,param_mean,param_std"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        let vec = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "{},{},{:.10e},{:.4e},{:.10e},{:.10e},{},{:.4},\"[{}]\",\"[{}]\"",
            match self.kind {
                LoopKind::Single => "single",
                LoopKind::Cascade => "cascade",
            },
            opt(self.mv),
            self.mov.mean,
            self.mov.std,
            self.mov.worst,
            self.mov.best,
            opt(self.performance_index),
            self.mean_time_s,
            vec(&self.param_mean),
            vec(&self.param_std),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_basic() {
        let s = RunStats::from_values(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(s.best, 1.0);
        assert_eq!(s.worst, 3.0);
        assert_eq!(RunStats::from_values(&[4.0]).std, 0.0);
    }

    #[test]
    fn repeated_runs_are_ordered_and_seeded() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2);
        let cfg = TlboConfig::new(1).with_seed(40);
        let a = run_repeated(&f, &cfg, 4).unwrap();
        let b = run_repeated(&f, &cfg, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.best_point, y.best_point);
            assert_eq!(x.fitness_history, y.fitness_history);
        }
        let single = tlbo::minimize(&f, &cfg.clone().with_seed(42)).unwrap();
        assert_eq!(single.best_point, a[2].best_point);
    }
}
