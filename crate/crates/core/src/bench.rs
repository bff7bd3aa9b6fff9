//! Embedded benchmark corpus: ten single-loop assessment problems with
//! their published reference results, plus two temperature-control tuning
//! case studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeProblem;
use crate::error::{Error, Result};
use crate::lti::DiscreteTransferFunction;
use crate::report::AssessmentReport;
use crate::single::{assess_single, mv_benchmark, SingleLoopProblem};
use crate::tlbo::TlboConfig;
use crate::tuning::{IaeUnit, LoopModel, TuningProblem};

/// Relative tolerance on the mean MOV against the reference mean.
pub const MEAN_REL_TOL: f64 = 1e-3;
/// Relative tolerance on the run-to-run standard deviation.
pub const STD_REL_TOL: f64 = 1e-4;
/// Suite MOV may exceed the best known value by at most this fraction.
pub const BKMOV_REL_TOL: f64 = 1e-3;
/// Informational: relative distance of mean parameters from the reference.
pub const PARAM_REL_TOL: f64 = 1e-2;

/// Published result row for one benchmark problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub id: usize,
    pub mv: f64,
    pub bkmov: f64,
    pub mean: f64,
    pub std: f64,
    pub worst: f64,
    pub time_s: f64,
    pub params: [f64; 3],
    pub params_std: [f64; 3],
}

pub const REFERENCE: [ReferenceEntry; 10] = [
    ReferenceEntry { id: 1, mv: 2.9427, bkmov: 3.0728, mean: 3.0728, std: 3.36e-10, worst: 3.0728, time_s: 0.3106, params: [2.8408, -4.4059, 1.7486], params_std: [1.51e-5, 9.22e-5, 4.53e-5] },
    ReferenceEntry { id: 2, mv: 0.0306, bkmov: 0.0310, mean: 0.0310, std: 2.15e-11, worst: 0.0310, time_s: 0.7524, params: [1.8236, -3.3531, 1.5299], params_std: [1.31e-4, 6.84e-4, 3.12e-4] },
    ReferenceEntry { id: 3, mv: 3.0112, bkmov: 3.0238, mean: 3.0232, std: 5.16e-10, worst: 3.0232, time_s: 3.6852, params: [0.4989, -0.9663, 0.4674], params_std: [1.17e-5, 3.71e-5, 2.03e-5] },
    ReferenceEntry { id: 4, mv: 3.4004, bkmov: 3.4065, mean: 3.4064, std: 4.94e-9, worst: 3.4064, time_s: 0.3624, params: [0.1354, -0.2523, 0.1170], params_std: [8.00e-6, 1.47e-5, 7.19e-6] },
    ReferenceEntry { id: 5, mv: 11.9528, bkmov: 13.8076, mean: 13.8068, std: 5.18e-7, worst: 13.8068, time_s: 0.3800, params: [0.7241, -1.2058, 0.5178], params_std: [1.25e-5, 3.34e-6, 1.82e-6] },
    ReferenceEntry { id: 6, mv: 58.3406, bkmov: 87.7377, mean: 87.7069, std: 7.88e-10, worst: 87.7069, time_s: 0.4128, params: [0.8327, -1.4003, 0.6094], params_std: [5.00e-7, 7.67e-6, 4.33e-6] },
    ReferenceEntry { id: 7, mv: 0.2978, bkmov: 0.4246, mean: 0.4246, std: 5.36e-8, worst: 0.4246, time_s: 0.2691, params: [8.0941, -13.1891, 5.5927], params_std: [7.27e-4, 4.69e-4, 2.55e-4] },
    ReferenceEntry { id: 8, mv: 3.0000, bkmov: 3.2032, mean: 3.2032, std: 3.40e-8, worst: 3.2032, time_s: 0.1900, params: [6.5338, -9.2379, 3.3583], params_std: [3.74e-5, 1.79e-4, 1.16e-4] },
    ReferenceEntry { id: 9, mv: 0.3144, bkmov: 0.4268, mean: 0.4267, std: 2.50e-9, worst: 0.4267, time_s: 0.3395, params: [8.2318, -13.7793, 5.9701], params_std: [1.00e-4, 2.51e-4, 1.45e-4] },
    ReferenceEntry { id: 10, mv: 0.0023, bkmov: 0.0024, mean: 0.0024, std: 2.41e-10, worst: 0.0024, time_s: 0.1436, params: [6.1676, -8.5741, 3.0332], params_std: [5.73e-4, 1.35e-3, 7.63e-4] },
];

/// Number of decimals the reference MOV and MV values were printed with.
pub const REFERENCE_DECIMALS: i32 = 4;

pub fn reference(id: usize) -> Result<&'static ReferenceEntry> {
    REFERENCE
        .iter()
        .find(|r| r.id == id)
        .ok_or(Error::UnknownBenchmark(id))
}

fn tf(num: &[f64], den: &[f64], delay: usize) -> DiscreteTransferFunction {
    DiscreteTransferFunction::new(num.to_vec(), den.to_vec(), delay).expect("embedded model")
}

/// `prod (1 + c q^-1)` over the given `c`.
fn factors(cs: &[f64]) -> Vec<f64> {
    cs.iter().fold(vec![1.0], |acc, &c| {
        let mut out = vec![0.0; acc.len() + 1];
        for (i, a) in acc.iter().enumerate() {
            out[i] += a;
            out[i + 1] += a * c;
        }
        out
    })
}

/// Benchmark problem `id` (1..=10) with unit noise variance and `p = 8 d`.
pub fn load_benchmark(id: usize) -> Result<SingleLoopProblem> {
    let (g, gd) = match id {
        1 => (tf(&[0.2], &[1.0, -0.8], 5), tf(&[1.0], &factors(&[-1.0, 0.4]), 0)),
        2 => (
            tf(&[0.08919], &[1.0, -0.8669], 12),
            tf(&[0.08919], &[1.0, -0.8669], 0),
        ),
        3 => (
            tf(&[0.5108], &[1.0, -0.9604], 28),
            tf(&[0.5108], &[1.0, -0.9604], 0),
        ),
        4 => (
            tf(&[1.0], &[1.0, -0.8], 6),
            tf(&[1.0, 0.6], &factors(&[-0.5, -0.6, 0.7]), 0),
        ),
        5 => (
            tf(&[1.0], &[1.0, -0.8], 6),
            tf(&[1.0, -0.2], &factors(&[-1.0, -0.3, 0.4, -0.5]), 0),
        ),
        6 => (
            tf(&[1.0], &[1.0, -0.8], 6),
            tf(&[1.0, 0.6], &factors(&[-1.0, -0.5, -0.6, 0.7]), 0),
        ),
        7 => (
            tf(&[0.1], &[1.0, -0.8], 5),
            tf(&[0.1], &factors(&[-1.0, -0.3, -0.6]), 0),
        ),
        8 => (tf(&[0.1], &[1.0, -0.8], 3), tf(&[1.0], &[1.0, -1.0], 0)),
        9 => (
            tf(&[0.1], &[1.0, -0.8], 6),
            tf(&[0.1], &factors(&[-1.0, -0.7]), 0),
        ),
        10 => (
            tf(&[0.1], &[1.0, -0.8], 3),
            tf(&[0.001f64.sqrt()], &factors(&[-1.0, 0.2]), 0),
        ),
        _ => return Err(Error::UnknownBenchmark(id)),
    };
    SingleLoopProblem::new(g, gd, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudy {
    AirSingle,
    ImmersionCascade,
}

impl CaseStudy {
    pub fn name(self) -> &'static str {
        match self {
            CaseStudy::AirSingle => "air_single",
            CaseStudy::ImmersionCascade => "immersion_cascade",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "air_single" => Ok(CaseStudy::AirSingle),
            "immersion_cascade" => Ok(CaseStudy::ImmersionCascade),
            other => Err(Error::UnknownCaseStudy(other.to_string())),
        }
    }

    /// Published tuning rows `(rho, params, variance)`.
    pub fn reference_rows(self) -> &'static [TuningReference] {
        match self {
            CaseStudy::AirSingle => &AIR_SINGLE_ROWS,
            CaseStudy::ImmersionCascade => &IMMERSION_ROWS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningReference {
    pub rho: f64,
    pub params: [f64; 3],
    pub variance: f64,
}

pub const AIR_SINGLE_ROWS: [TuningReference; 4] = [
    TuningReference { rho: 0.0, params: [5.3333, -6.8756, 1.8693], variance: 7.7624e-5 },
    TuningReference { rho: 1e5, params: [7.9520, -10.2099, 2.8804], variance: 4.0747e-5 },
    TuningReference { rho: 2.5e5, params: [9.5647, -12.4166, 3.6362], variance: 3.2726e-5 },
    TuningReference { rho: 10e5, params: [23.1165, -35.5929, 14.4531], variance: 2.6432e-5 },
];

pub const IMMERSION_ROWS: [TuningReference; 4] = [
    TuningReference { rho: 0.0, params: [2.7638, -2.6554, -0.8436], variance: 6.0551e-4 },
    TuningReference { rho: 1e6, params: [3.0563, -2.9922, -0.9631], variance: 5.3566e-4 },
    TuningReference { rho: 10e6, params: [2.8715, -2.8482, -1.0054], variance: 4.9421e-4 },
    TuningReference { rho: 100e6, params: [2.9088, -2.8420, -0.9538], variance: 4.8117e-4 },
];

/// Shock variances of the immersion-liquid loop, outer and inner.
pub const IMMERSION_NOISE: (f64, f64) = (5e-5, 5e-4);

/// Air-temperature single loop (`T_s = 10 s`) or immersion-liquid cascade
/// (`T_s = 6 s`), with `rho = 0` and unit setpoint. IAE is summed per
/// sample; the reference weights are sized for that scale.
pub fn load_case_study(case: CaseStudy) -> TuningProblem {
    match case {
        CaseStudy::AirSingle => {
            let g = tf(&[0.0413], &[1.0, -0.8952], 4);
            let gd = tf(&[0.2], &factors(&[-1.0, -0.8952]), 0);
            TuningProblem {
                plant: LoopModel::Single(SingleLoopProblem::new(g, gd, 1e-5).expect("valid")),
                weight: 0.0,
                horizon: 200,
                sample_time: 10.0,
                setpoint: 1.0,
                iae_unit: IaeUnit::Samples,
            }
        }
        CaseStudy::ImmersionCascade => {
            let problem = CascadeProblem::new(
                tf(&[0.04292], &[1.0, -0.9575], 7),
                tf(&[-0.5314], &[1.0, -0.6023], 3),
                tf(&[1.0], &[1.0, -0.9575], 0),
                tf(&[1.0], &[1.0, -0.6023], 0),
                IMMERSION_NOISE,
            )
            .expect("valid");
            TuningProblem {
                plant: LoopModel::Cascade(problem),
                weight: 0.0,
                horizon: 1000,
                sample_time: 6.0,
                setpoint: 1.0,
                iae_unit: IaeUnit::Samples,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub id: usize,
    pub reference: ReferenceEntry,
    pub mv: f64,
    pub report: Option<AssessmentReport>,
    pub error: Option<String>,
    pub mean_rel_err: f64,
    pub std_rel: f64,
    pub mv_matches: bool,
    pub mean_ok: bool,
    pub std_ok: bool,
    pub bkmov_ok: bool,
    /// Informational only.
    pub params_within_tol: bool,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.mv_matches && self.mean_ok && self.std_ok && self.bkmov_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub runs: usize,
    pub tlbo: TlboConfig,
    pub rows: Vec<SuiteRow>,
    pub elapsed_s: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(SuiteRow::passed)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| Example | MV | BKMOV | Mean | Std | Worst | Time(s) | Ref mean | Δ rel | Pass |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            match &r.report {
                Some(rep) => s.push_str(&format!(
                    "| {} | {:.4} | {:.4} | {:.4} | {:.2e} | {:.4} | {:.4} | {:.4} | {:.2e} | {} |\n",
                    r.id,
                    r.mv,
                    r.reference.bkmov,
                    rep.mov.mean,
                    rep.mov.std,
                    rep.mov.worst,
                    rep.mean_time_s,
                    r.reference.mean,
                    r.mean_rel_err,
                    if r.passed() { "yes" } else { "NO" }
                )),
                None => s.push_str(&format!(
                    "| {} | {:.4} | {:.4} | - | - | - | - | {:.4} | - | error: {} |\n",
                    r.id,
                    r.mv,
                    r.reference.bkmov,
                    r.reference.mean,
                    r.error.as_deref().unwrap_or("")
                )),
            }
        }
        s.push_str("\n| Example | Mean params | Std params | Ref params |\n|---|---|---|---|\n");
        for r in &self.rows {
            if let Some(rep) = &r.report {
                s.push_str(&format!(
                    "| {} | [{:.4}, {:.4}, {:.4}] | [{:.2e}, {:.2e}, {:.2e}] | [{:.4}, {:.4}, {:.4}] |\n",
                    r.id,
                    rep.param_mean[0],
                    rep.param_mean[1],
                    rep.param_mean[2],
                    rep.param_std[0],
                    rep.param_std[1],
                    rep.param_std[2],
                    r.reference.params[0],
                    r.reference.params[1],
                    r.reference.params[2],
                ));
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "id,mv,bkmov,mean,std,worst,time_s,ref_mean,mean_rel_err,k1,k2,k3,k1_std,k2_std,k3_std,pass\n",
        );
        for r in &self.rows {
            if let Some(rep) = &r.report {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.id,
                    r.mv,
                    r.reference.bkmov,
                    rep.mov.mean,
                    rep.mov.std,
                    rep.mov.worst,
                    rep.mean_time_s,
                    r.reference.mean,
                    r.mean_rel_err,
                    rep.param_mean[0],
                    rep.param_mean[1],
                    rep.param_mean[2],
                    rep.param_std[0],
                    rep.param_std[1],
                    rep.param_std[2],
                    r.passed()
                ));
            } else {
                s.push_str(&format!(
                    "{},{},{},,,,,{},,,,,,,,false\n",
                    r.id, r.mv, r.reference.bkmov, r.reference.mean
                ));
            }
        }
        s
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

/// Matches a printed reference: within `rel_tol`, or equal once rounded to
/// the printed decimals.
pub fn matches_printed(value: f64, printed: f64, rel_tol: f64) -> bool {
    (value - printed).abs() <= rel_tol * printed.abs()
        || round_to(value, REFERENCE_DECIMALS) == printed
}

fn row_for(id: usize, cfg: &TlboConfig, runs: usize) -> Result<SuiteRow> {
    let problem = load_benchmark(id)?;
    let reference = *reference(id)?;
    let mv = mv_benchmark(&problem);
    let mv_matches = round_to(mv, REFERENCE_DECIMALS) == reference.mv;
    let row = match assess_single(&problem, cfg, runs) {
        Ok(rep) => {
            let mean_rel_err = (rep.mov.mean - reference.mean).abs() / reference.mean;
            let std_rel = rep.mov.std / rep.mov.mean;
            let params_within_tol = rep
                .param_mean
                .iter()
                .zip(reference.params)
                .all(|(p, r)| (p - r).abs() <= PARAM_REL_TOL * r.abs());
            SuiteRow {
                id,
                reference,
                mv,
                mean_ok: matches_printed(rep.mov.mean, reference.mean, MEAN_REL_TOL),
                std_ok: std_rel <= STD_REL_TOL,
                bkmov_ok: rep.mov.mean <= reference.bkmov * (1.0 + BKMOV_REL_TOL)
                    || round_to(rep.mov.mean, REFERENCE_DECIMALS) <= reference.bkmov,
                mean_rel_err,
                std_rel,
                mv_matches,
                params_within_tol,
                report: Some(rep),
                error: None,
            }
        }
        Err(e) => SuiteRow {
            id,
            reference,
            mv,
            report: None,
            error: Some(e.to_string()),
            mean_rel_err: f64::NAN,
            std_rel: f64::NAN,
            mv_matches,
            mean_ok: false,
            std_ok: false,
            bkmov_ok: false,
            params_within_tol: false,
        },
    };
    Ok(row)
}

/// Assesses every listed problem `runs` times. Optimizer failures are
/// recorded per row and do not abort the suite.
pub fn run_benchmark_suite(cfg: &TlboConfig, runs: usize, ids: &[usize]) -> Result<SuiteReport> {
    if runs == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    for &id in ids {
        reference(id)?;
    }
    let start = std::time::Instant::now();
    let rows = ids
        .par_iter()
        .map(|&id| row_for(id, cfg, runs))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport {
        runs,
        tlbo: cfg.clone(),
        rows,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
