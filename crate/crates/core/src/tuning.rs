//! Controller tuning against `IAE + rho * sigma_y^2`.
//!
//! The IAE term comes from a noise-free setpoint step, the variance term
//! from the analytic disturbance response with the setpoint held at zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{pip_loop_stable, CascadeObjective, CascadeParams, CascadeProblem};
use crate::error::{Error, Result};
use crate::loops::{CascadeLoop, SingleLoop};
use crate::lti::DiscreteTransferFunction;
use crate::single::{pid_loop_stable, CpaObjective, ReducedPidParams, SingleLoopProblem};
use crate::report::{run_repeated, run_seed};
use crate::tlbo::{Objective, StopReason, TlboConfig};

/// Outputs beyond this multiple of the setpoint count as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LoopModel {
    Single(SingleLoopProblem),
    Cascade(CascadeProblem),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerParams {
    Pid(ReducedPidParams),
    PiP(CascadeParams),
}

impl ControllerParams {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ControllerParams::Pid(k) => k.to_array().to_vec(),
            ControllerParams::PiP(k) => k.to_array().to_vec(),
        }
    }
}

impl LoopModel {
    /// Interprets a decision vector for this loop structure.
    pub fn params(&self, x: &[f64]) -> ControllerParams {
        match self {
            LoopModel::Single(_) => ControllerParams::Pid(ReducedPidParams::from_slice(x)),
            LoopModel::Cascade(_) => ControllerParams::PiP(CascadeParams::from_slice(x)),
        }
    }
}

/// Time unit of the IAE integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IaeUnit {
    /// `sum |e| * T_s`.
    #[default]
    Seconds,
    /// `sum |e|`, time counted in samples.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningProblem {
    pub plant: LoopModel,
    /// Weight `rho` on the output variance.
    pub weight: f64,
    /// Simulation length in samples.
    pub horizon: usize,
    /// Seconds per sample.
    pub sample_time: f64,
    pub setpoint: f64,
    #[serde(default)]
    pub iae_unit: IaeUnit,
}

impl TuningProblem {
    /// Width of one sample in the IAE sum.
    pub fn iae_dt(&self) -> f64 {
        match self.iae_unit {
            IaeUnit::Seconds => self.sample_time,
            IaeUnit::Samples => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "weight rho must be finite and non-negative, got {}",
                self.weight
            )));
        }
        if self.horizon < 2 {
            return Err(Error::InvalidProblem("horizon must be at least 2 samples".into()));
        }
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::InvalidProblem("sample_time must be positive".into()));
        }
        if !(self.setpoint != 0.0 && self.setpoint.is_finite()) {
            return Err(Error::InvalidProblem("setpoint amplitude must be non-zero".into()));
        }
        match &self.plant {
            LoopModel::Single(p) => p.validate(),
            LoopModel::Cascade(p) => p.validate(),
        }
    }

    pub fn with_weight(&self, weight: f64) -> Self {
        Self {
            weight,
            ..self.clone()
        }
    }

    /// Warns when the horizon is shorter than ten dominant time constants
    /// of the (outer) process.
    pub fn horizon_warning(&self) -> Option<String> {
        let process = match &self.plant {
            LoopModel::Single(p) => &p.process,
            LoopModel::Cascade(p) => &p.outer,
        };
        let span = self.horizon as f64 * self.sample_time;
        match dominant_time_constant(process, self.sample_time) {
            None => Some("process is not asymptotically stable; settling is not guaranteed".into()),
            Some(tau) if span < 10.0 * tau => Some(format!(
                "horizon {span} s is shorter than 10 dominant time constants ({:.1} s)",
                10.0 * tau
            )),
            Some(_) => None,
        }
    }
}

/// Time constant of the slowest pole, read off the asymptotic decay rate
/// of the impulse response. `None` when the response does not decay.
fn dominant_time_constant(tf: &DiscreteTransferFunction, sample_time: f64) -> Option<f64> {
    let g = tf.impulse_response(tf.delay() + 2000).into_coeffs();
    let n = g.len();
    let window = |a: usize| g[a..a + 100].iter().map(|v| v * v).sum::<f64>();
    let (e1, e2) = (window(n - 1100), window(n - 200));
    if e1 == 0.0 {
        return Some(0.0);
    }
    let r = (e2 / e1).powf(1.0 / (2.0 * 900.0));
    if !(r < 1.0) {
        return None;
    }
    if r == 0.0 {
        return Some(0.0);
    }
    Some(-sample_time / r.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponseRecord {
    pub time: Vec<f64>,
    pub setpoint: Vec<f64>,
    pub output: Vec<f64>,
    pub error: Vec<f64>,
    /// Percent above the setpoint amplitude, zero if never exceeded.
    pub overshoot_pct: f64,
    /// First time after which the error stays inside a 2% band; `None`
    /// if the output has not settled by the end of the horizon.
    pub settling_time: Option<f64>,
    /// `sum |e(t)| * dt`, `dt` being `T_s` or one sample. A divergent run is charged the divergence
    /// threshold for every sample it did not reach, so the value stays
    /// finite but dwarfs any stable loop and still ranks later divergence
    /// as better.
    pub iae: f64,
    pub unstable: bool,
}

impl StepResponseRecord {
    fn from_series(
        output: Vec<f64>,
        error: Vec<f64>,
        amplitude: f64,
        ts: f64,
        iae_dt: f64,
        missing: usize,
    ) -> Self {
        let n = output.len();
        let unstable = missing > 0;
        let time: Vec<f64> = (0..n).map(|t| t as f64 * ts).collect();
        let mut abs_sum: f64 = error.iter().map(|e| e.abs()).filter(|e| e.is_finite()).sum();
        if unstable {
            abs_sum += missing as f64 * DIVERGENCE_FACTOR * amplitude.abs();
        }
        let iae = abs_sum * iae_dt;
        let peak = output
            .iter()
            .map(|y| y / amplitude)
            .fold(f64::NEG_INFINITY, f64::max);
        let overshoot_pct = ((peak - 1.0) * 100.0).max(0.0);
        let band = SETTLING_BAND * amplitude.abs();
        let settling_time = if unstable {
            None
        } else {
            match error.iter().rposition(|e| e.abs() > band) {
                None => Some(0.0),
                Some(t) if t + 1 == n => None,
                Some(t) => Some((t + 1) as f64 * ts),
            }
        };
        Self {
            time,
            setpoint: vec![amplitude; n],
            output,
            error,
            overshoot_pct,
            settling_time,
            iae,
            unstable,
        }
    }

    pub fn final_error(&self) -> f64 {
        self.error.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with `time,setpoint,output` columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,setpoint,output\n");
        for ((t, r), y) in self.time.iter().zip(&self.setpoint).zip(&self.output) {
            s.push_str(&format!("{t},{r},{y}\n"));
        }
        s
    }
}

/// Where each stage begins and which controller it uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub params: ControllerParams,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCriteria {
    pub start: usize,
    pub end: usize,
    pub params: ControllerParams,
    pub iae: f64,
    pub overshoot_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistageRecord {
    pub response: StepResponseRecord,
    pub stages: Vec<StageCriteria>,
}

enum AnyLoop {
    Single(SingleLoop),
    Cascade(CascadeLoop),
}

impl AnyLoop {
    fn new(plant: &LoopModel, params: ControllerParams) -> Result<Self> {
        match (plant, params) {
            (LoopModel::Single(p), ControllerParams::Pid(k)) => {
                Ok(AnyLoop::Single(SingleLoop::new(&p.process, k)?))
            }
            (LoopModel::Cascade(p), ControllerParams::PiP(k)) => {
                Ok(AnyLoop::Cascade(CascadeLoop::new(&p.outer, &p.inner, k)?))
            }
            _ => Err(Error::InvalidProblem(
                "controller structure does not match the loop model".into(),
            )),
        }
    }

    fn set(&mut self, params: ControllerParams) -> Result<()> {
        match (self, params) {
            (AnyLoop::Single(l), ControllerParams::Pid(k)) => l.set_params(k),
            (AnyLoop::Cascade(l), ControllerParams::PiP(k)) => l.set_params(k),
            _ => {
                return Err(Error::InvalidProblem(
                    "controller structure does not match the loop model".into(),
                ))
            }
        }
        Ok(())
    }

    fn step(&mut self, sp: f64) -> (f64, f64) {
        let s = match self {
            AnyLoop::Single(l) => l.step(sp, 0.0),
            AnyLoop::Cascade(l) => l.step(sp, 0.0, 0.0),
        };
        (s.output, s.error)
    }
}

fn run_stages(
    plant: &LoopModel,
    stages: &[Stage],
    horizon: usize,
    ts: f64,
    iae_dt: f64,
    amplitude: f64,
) -> Result<StepResponseRecord> {
    let mut lp = AnyLoop::new(plant, stages[0].params)?;
    let mut next = 1;
    let mut output = Vec::with_capacity(horizon);
    let mut error = Vec::with_capacity(horizon);
    let mut missing = 0;
    for t in 0..horizon {
        while next < stages.len() && stages[next].start == t {
            lp.set(stages[next].params)?;
            next += 1;
        }
        let (y, e) = lp.step(amplitude);
        output.push(y);
        error.push(e);
        if !y.is_finite() || y.abs() > DIVERGENCE_FACTOR * amplitude.abs() {
            missing = horizon - t;
            break;
        }
    }
    Ok(StepResponseRecord::from_series(output, error, amplitude, ts, iae_dt, missing))
}

/// Noise-free setpoint step of a single PID loop from zero initial state.
/// IAE is integrated in seconds.
pub fn simulate_step_single(
    process: &DiscreteTransferFunction,
    k: &ReducedPidParams,
    horizon: usize,
    sample_time: f64,
    amplitude: f64,
) -> Result<StepResponseRecord> {
    step_single(process, k, horizon, sample_time, sample_time, amplitude)
}

fn step_single(
    process: &DiscreteTransferFunction,
    k: &ReducedPidParams,
    horizon: usize,
    sample_time: f64,
    iae_dt: f64,
    amplitude: f64,
) -> Result<StepResponseRecord> {
    let mut lp = SingleLoop::new(process, *k)?;
    let mut output = Vec::with_capacity(horizon);
    let mut error = Vec::with_capacity(horizon);
    let mut missing = 0;
    for t in 0..horizon {
        let s = lp.step(amplitude, 0.0);
        output.push(s.output);
        error.push(s.error);
        if !s.output.is_finite() || s.output.abs() > DIVERGENCE_FACTOR * amplitude.abs() {
            missing = horizon - t;
            break;
        }
    }
    Ok(StepResponseRecord::from_series(
        output,
        error,
        amplitude,
        sample_time,
        iae_dt,
        missing,
    ))
}

/// Noise-free setpoint step of the PI/P cascade; the error is taken on
/// the outer output. IAE is integrated in seconds.
pub fn simulate_step_cascade(
    problem: &CascadeProblem,
    k: &CascadeParams,
    horizon: usize,
    sample_time: f64,
    amplitude: f64,
) -> Result<StepResponseRecord> {
    run_stages(
        &LoopModel::Cascade(problem.clone()),
        &[Stage {
            params: ControllerParams::PiP(*k),
            start: 0,
        }],
        horizon,
        sample_time,
        sample_time,
        amplitude,
    )
}

pub fn simulate(problem: &TuningProblem, params: &ControllerParams) -> Result<StepResponseRecord> {
    match (&problem.plant, params) {
        (LoopModel::Single(p), ControllerParams::Pid(k)) => step_single(
            &p.process,
            k,
            problem.horizon,
            problem.sample_time,
            problem.iae_dt(),
            problem.setpoint,
        ),
        _ => run_stages(
            &problem.plant,
            &[Stage {
                params: *params,
                start: 0,
            }],
            problem.horizon,
            problem.sample_time,
            problem.iae_dt(),
            problem.setpoint,
        ),
    }
}

/// Switches controller parameters at the given samples. The incremental
/// control law keeps its state across a switch, so transfers are bumpless.
pub fn simulate_multistage(problem: &TuningProblem, stages: &[Stage]) -> Result<MultistageRecord> {
    if stages.is_empty() {
        return Err(Error::InvalidProblem("at least one stage is required".into()));
    }
    if stages[0].start != 0 {
        return Err(Error::InvalidProblem("the first stage must start at sample 0".into()));
    }
    // A later stage may also start at 0, which replaces the first one.
    for w in stages[1..].windows(2) {
        if w[1].start <= w[0].start {
            return Err(Error::InvalidProblem(
                "stage switch samples must be strictly increasing".into(),
            ));
        }
    }
    let response = run_stages(
        &problem.plant,
        stages,
        problem.horizon,
        problem.sample_time,
        problem.iae_dt(),
        problem.setpoint,
    )?;
    let n = response.output.len();
    let mut criteria = Vec::with_capacity(stages.len());
    for (i, st) in stages.iter().enumerate() {
        let start = st.start.min(n);
        let end = stages.get(i + 1).map_or(n, |s| s.start.min(n));
        let win_e = &response.error[start..end];
        let win_y = &response.output[start..end];
        let peak = win_y
            .iter()
            .map(|y| y / problem.setpoint)
            .fold(f64::NEG_INFINITY, f64::max);
        criteria.push(StageCriteria {
            start,
            end,
            params: st.params,
            iae: win_e.iter().map(|e| e.abs()).sum::<f64>() * problem.iae_dt(),
            overshoot_pct: if win_y.is_empty() {
                0.0
            } else {
                ((peak - 1.0) * 100.0).max(0.0)
            },
        });
    }
    Ok(MultistageRecord {
        response,
        stages: criteria,
    })
}

/// Closed-loop characteristic polynomial test. The step simulation only
/// sees divergence within its horizon; this also catches slow drifts.
pub fn closed_loop_stable(plant: &LoopModel, params: &ControllerParams) -> bool {
    match (plant, params) {
        (LoopModel::Single(p), ControllerParams::Pid(k)) => pid_loop_stable(&p.process, k),
        (LoopModel::Cascade(p), ControllerParams::PiP(k)) => pip_loop_stable(&p.outer, &p.inner, k),
        _ => false,
    }
}

enum VarianceModel {
    Single(CpaObjective),
    Cascade(CascadeObjective),
}

/// `x -> IAE(x) + rho * sigma_y^2(x)`; candidates that do not stabilize
/// the loop score a penalised IAE alone.
pub struct TuningObjective {
    problem: TuningProblem,
    variance: VarianceModel,
}

impl TuningObjective {
    pub fn new(problem: &TuningProblem) -> Result<Self> {
        problem.validate()?;
        let variance = match &problem.plant {
            LoopModel::Single(p) => VarianceModel::Single(CpaObjective::new(p)),
            LoopModel::Cascade(p) => VarianceModel::Cascade(CascadeObjective::new(p)),
        };
        Ok(Self {
            problem: problem.clone(),
            variance,
        })
    }

    pub fn variance(&self, params: &ControllerParams) -> f64 {
        match (&self.variance, params) {
            (VarianceModel::Single(v), ControllerParams::Pid(k)) => v.value(k),
            (VarianceModel::Cascade(v), ControllerParams::PiP(k)) => v.value(k),
            _ => f64::NAN,
        }
    }

    pub fn iae(&self, params: &ControllerParams) -> f64 {
        match simulate(&self.problem, params) {
            Ok(r) => r.iae,
            Err(_) => f64::INFINITY,
        }
    }

    pub fn value(&self, params: &ControllerParams) -> f64 {
        let Ok(step) = simulate(&self.problem, params) else {
            return f64::INFINITY;
        };
        // the truncated variance means nothing for a divergent loop
        if step.unstable {
            return step.iae;
        }
        if !closed_loop_stable(&self.problem.plant, params) {
            // ranks just below a run that diverged on its final sample
            return step.iae + DIVERGENCE_FACTOR * self.problem.setpoint.abs() * self.problem.iae_dt();
        }
        if self.problem.weight == 0.0 {
            return step.iae;
        }
        step.iae + self.problem.weight * self.variance(params)
    }
}

impl Objective for TuningObjective {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.value(&self.problem.plant.params(x))
    }
}

pub fn tuning_objective(problem: &TuningProblem) -> Result<TuningObjective> {
    TuningObjective::new(problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub rho: f64,
    pub params: ControllerParams,
    pub objective: f64,
    pub variance: f64,
    pub iae: f64,
    pub overshoot_pct: f64,
    pub settling_time: Option<f64>,
    pub final_error: f64,
    /// Closed-loop characteristic roots all inside the unit circle.
    pub stable: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub elapsed_s: f64,
    pub horizon: usize,
    pub sample_time: f64,
    pub iae_unit: IaeUnit,
    pub setpoint: f64,
    pub runs: usize,
    /// Seed of the winning run.
    pub seed: u64,
    #[serde(skip)]
    pub response: Option<StepResponseRecord>,
}

/// Best of `runs` seeded optimizations (seeds `cfg.seed, cfg.seed + 1, ...`),
/// ranked by objective.
pub fn tune(problem: &TuningProblem, cfg: &TlboConfig, runs: usize) -> Result<TuningReport> {
    let objective = tuning_objective(problem)?;
    let results = run_repeated(&objective, cfg, runs)?;
    let (index, res) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_fitness.total_cmp(&b.1.best_fitness))
        .expect("at least one run");
    let params = problem.plant.params(&res.best_point);
    let response = simulate(problem, &params)?;
    Ok(TuningReport {
        rho: problem.weight,
        params,
        objective: res.best_fitness,
        variance: objective.variance(&params),
        iae: response.iae,
        overshoot_pct: response.overshoot_pct,
        settling_time: response.settling_time,
        final_error: response.final_error(),
        stable: closed_loop_stable(&problem.plant, &params),
        iterations: res.iterations,
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        converged: res.stop_reason == StopReason::Converged,
        elapsed_s: results.iter().map(|r| r.elapsed).sum(),
        horizon: problem.horizon,
        sample_time: problem.sample_time,
        iae_unit: problem.iae_unit,
        setpoint: problem.setpoint,
        runs: results.len(),
        seed: run_seed(cfg.seed, index),
        response: Some(response),
    })
}

/// One [`tune`] per weight, in the order given.
pub fn tune_sweep(
    problem: &TuningProblem,
    weights: &[f64],
    cfg: &TlboConfig,
    runs: usize,
) -> Result<Vec<TuningReport>> {
    weights
        .par_iter()
        .map(|&w| tune(&problem.with_weight(w), cfg, runs))
        .collect()
}
