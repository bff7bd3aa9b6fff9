//! Problem files.
//!
//! A problem file is a TOML document describing either a single loop
//! (`[process]` + `[disturbance]`) or a cascade (`[outer]`, `[inner]`,
//! `[outer_disturbance]`, `[inner_disturbance]`). Coefficients are listed in
//! ascending powers of q^-1 and the dead time is a separate integer, so
//!
//! ```toml
//! [process]
//! num = [0.2]
//! den = [1.0, -0.8]
//! delay = 5
//! ```
//!
//! is `0.2 q^-5 / (1 - 0.8 q^-1)`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use pidperf::mc::{CorrelationMode, McConfig};
use pidperf::tuning::{IaeUnit, LoopModel, Stage, TuningProblem};
use pidperf::{CascadeProblem, DiscreteTransferFunction, SingleLoopProblem, TlboConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default)]
    pub delay: usize,
}

impl TfSpec {
    fn build(&self, section: &str) -> Result<DiscreteTransferFunction> {
        DiscreteTransferFunction::new(self.num.clone(), self.den.clone(), self.delay)
            .with_context(|| format!("section `[{section}]`"))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Single loop shock variance.
    pub variance: Option<f64>,
    pub outer: Option<f64>,
    pub inner: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssessmentSpec {
    pub p_multiplier: usize,
}

impl Default for AssessmentSpec {
    fn default() -> Self {
        Self { p_multiplier: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub start: usize,
    pub params: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSpec {
    pub rho: Option<f64>,
    pub rho_sweep: Option<Vec<f64>>,
    pub horizon: usize,
    pub sample_time: f64,
    pub setpoint: f64,
    pub iae_unit: IaeUnit,
    pub stages: Vec<StageSpec>,
}

impl Default for TuningSpec {
    fn default() -> Self {
        Self {
            rho: None,
            rho_sweep: None,
            horizon: 200,
            sample_time: 1.0,
            setpoint: 1.0,
            iae_unit: IaeUnit::Seconds,
            stages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Bounds {
    Uniform([f64; 2]),
    PerDimension(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TlboSpec {
    pub np: usize,
    /// `[lo, hi]` for every parameter or one pair per parameter.
    pub bounds: Bounds,
    pub tol: f64,
    pub window: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for TlboSpec {
    fn default() -> Self {
        let d = TlboConfig::new(3);
        Self {
            np: d.population,
            bounds: Bounds::Uniform([d.lower[0], d.upper[0]]),
            tol: d.termination_tol,
            window: d.termination_window,
            max_iters: d.max_iterations,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub samples: usize,
    /// Defaults to a tenth of `samples`.
    pub burn_in: Option<usize>,
    pub mode: CorrelationMode,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            burn_in: None,
            mode: CorrelationMode::FullyCorrelated,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub process: Option<TfSpec>,
    pub disturbance: Option<TfSpec>,
    pub outer: Option<TfSpec>,
    pub inner: Option<TfSpec>,
    pub outer_disturbance: Option<TfSpec>,
    pub inner_disturbance: Option<TfSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub assessment: AssessmentSpec,
    #[serde(default)]
    pub tuning: TuningSpec,
    #[serde(default)]
    pub tlbo: TlboSpec,
    #[serde(default)]
    pub mc: McSpec,
}

/// Values the CLI may override.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedTuning {
    pub rho: Vec<f64>,
    pub horizon: usize,
    pub sample_time: f64,
    pub setpoint: f64,
    pub iae_unit: IaeUnit,
    pub stages: Vec<StageSpec>,
}

/// Everything a run used, defaults filled in. Embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub source: String,
    pub model: LoopModel,
    pub p_multiplier: usize,
    pub truncation: usize,
    pub runs: usize,
    pub seed: u64,
    pub tlbo: TlboConfig,
    pub tuning: ResolvedTuning,
    pub mc: McConfig,
}

impl Resolved {
    pub fn tuning_problem(&self, rho: f64) -> TuningProblem {
        TuningProblem {
            plant: self.model.clone(),
            weight: rho,
            horizon: self.tuning.horizon,
            sample_time: self.tuning.sample_time,
            setpoint: self.tuning.setpoint,
            iae_unit: self.tuning.iae_unit,
        }
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.tuning
            .stages
            .iter()
            .map(|s| Stage {
                params: self.model.params(&s.params),
                start: s.start,
            })
            .collect()
    }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read problem file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in problem file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn model(&self) -> Result<LoopModel> {
        let single = self.process.is_some() || self.disturbance.is_some();
        let cascade = self.outer.is_some()
            || self.inner.is_some()
            || self.outer_disturbance.is_some()
            || self.inner_disturbance.is_some();
        let p_mul = self.assessment.p_multiplier;
        match (single, cascade) {
            (true, true) => bail!(
                "file mixes single-loop sections (`process`, `disturbance`) with cascade \
                 sections (`outer`, `inner`, `outer_disturbance`, `inner_disturbance`)"
            ),
            (false, false) => bail!(
                "no loop model: give `[process]` and `[disturbance]`, or `[outer]`, `[inner]`, \
                 `[outer_disturbance]` and `[inner_disturbance]`"
            ),
            (true, false) => {
                let g = required(&self.process, "process")?.build("process")?;
                let gd = required(&self.disturbance, "disturbance")?.build("disturbance")?;
                let var = self
                    .noise
                    .variance
                    .context("missing field `noise.variance` (shock variance of a single loop)")?;
                let p = p_mul * g.delay();
                let problem = SingleLoopProblem::with_truncation(g, gd, var, p)
                    .map_err(anyhow::Error::from)
                    .with_context(|| infeasible(p_mul))?;
                Ok(LoopModel::Single(problem))
            }
            (false, true) => {
                let g1 = required(&self.outer, "outer")?.build("outer")?;
                let g2 = required(&self.inner, "inner")?.build("inner")?;
                let gd1 = required(&self.outer_disturbance, "outer_disturbance")?
                    .build("outer_disturbance")?;
                let gd2 = required(&self.inner_disturbance, "inner_disturbance")?
                    .build("inner_disturbance")?;
                let v1 = self
                    .noise
                    .outer
                    .context("missing field `noise.outer` (outer shock variance)")?;
                let v2 = self
                    .noise
                    .inner
                    .context("missing field `noise.inner` (inner shock variance)")?;
                let p = p_mul * (g1.delay() + g2.delay());
                let problem = CascadeProblem::with_truncation(g1, g2, gd1, gd2, (v1, v2), p)
                    .map_err(anyhow::Error::from)
                    .with_context(|| infeasible(p_mul))?;
                Ok(LoopModel::Cascade(problem))
            }
        }
    }

    fn tlbo(&self, seed: u64) -> Result<TlboConfig> {
        let t = &self.tlbo;
        let (lower, upper) = match &t.bounds {
            Bounds::Uniform([lo, hi]) => (vec![*lo; 3], vec![*hi; 3]),
            Bounds::PerDimension(pairs) => {
                if pairs.len() != 3 {
                    bail!(
                        "field `tlbo.bounds`: expected one [lo, hi] pair per parameter (3), got {}",
                        pairs.len()
                    );
                }
                pairs.iter().map(|[lo, hi]| (*lo, *hi)).unzip()
            }
        };
        let cfg = TlboConfig {
            population: t.np,
            lower,
            upper,
            termination_window: t.window,
            termination_tol: t.tol,
            max_iterations: t.max_iters,
            ..TlboConfig::new(3)
        }
        .with_seed(seed);
        cfg.validate().context("section `[tlbo]`")?;
        Ok(cfg)
    }

    fn rho(&self) -> Result<Vec<f64>> {
        match (&self.tuning.rho, &self.tuning.rho_sweep) {
            (Some(_), Some(_)) => bail!("give either `tuning.rho` or `tuning.rho_sweep`, not both"),
            (Some(r), None) => Ok(vec![*r]),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Ok(vec![0.0]),
        }
    }

    /// Applies overrides and defaults and checks the result.
    pub fn resolve(&self, source: &str, ov: &Overrides, default_runs: usize) -> Result<Resolved> {
        let model = self.model()?;
        let seed = ov.seed.unwrap_or(self.tlbo.seed);
        let tlbo = self.tlbo(seed)?;
        let runs = ov.runs.unwrap_or(default_runs);
        if runs == 0 {
            bail!("--runs must be at least 1");
        }
        let rho = match &ov.rho {
            Some(r) => r.clone(),
            None => self.rho()?,
        };
        if rho.is_empty() {
            bail!("the rho sweep is empty");
        }
        for &r in &rho {
            if !(r >= 0.0 && r.is_finite()) {
                bail!("rho must be finite and non-negative, got {r}");
            }
        }
        let t = &self.tuning;
        let tuning = ResolvedTuning {
            rho,
            horizon: t.horizon,
            sample_time: t.sample_time,
            setpoint: t.setpoint,
            iae_unit: t.iae_unit,
            stages: t.stages.clone(),
        };
        let mc = McConfig {
            samples: self.mc.samples,
            burn_in: self.mc.burn_in.unwrap_or(self.mc.samples / 10),
            seed: self.mc.seed.unwrap_or(seed),
            correlation_mode: self.mc.mode,
        };
        let truncation = match &model {
            LoopModel::Single(p) => p.truncation,
            LoopModel::Cascade(p) => p.truncation,
        };
        let resolved = Resolved {
            source: source.to_string(),
            model,
            p_multiplier: self.assessment.p_multiplier,
            truncation,
            runs,
            seed,
            tlbo,
            tuning,
            mc,
        };
        resolved
            .tuning_problem(resolved.tuning.rho[0])
            .validate()
            .context("section `[tuning]`")?;
        Ok(resolved)
    }
}

fn required<'a>(section: &'a Option<TfSpec>, name: &str) -> Result<&'a TfSpec> {
    section
        .as_ref()
        .with_context(|| format!("missing section `[{name}]`"))
}

fn infeasible(p_mul: usize) -> String {
    format!(
        "infeasible assessment: the truncation length is p = p_multiplier ({p_mul}) x dead time \
         and must cover the dead time; use p_multiplier >= 1"
    )
}
