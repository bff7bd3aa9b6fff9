use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pidperf::bench::{run_benchmark_suite, SuiteReport};
use pidperf::mc::{validate_cascade, validate_single, ValidationBlock};
use pidperf::tuning::{
    simulate_multistage, tune_sweep, ControllerParams, LoopModel, MultistageRecord, Stage,
    StageCriteria, TuningReport,
};
use pidperf::{
    assess_cascade, assess_single, AssessmentReport, CascadeParams, ReducedPidParams, TlboConfig,
};
use serde::Serialize;

use crate::problem::{Overrides, ProblemFile, Resolved};
use crate::{Cli, Command, Format};

pub enum Outcome {
    Pass,
    Fail(String),
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, T: Serialize> {
    command: &'static str,
    version: &'static str,
    config: &'a C,
    result: &'a T,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Assess {
            file,
            validate,
            tol,
        } => assess(cli, file, *validate, *tol),
        Command::Tune {
            file,
            rho,
            rho_sweep,
            multistage,
        } => {
            let rho = rho.map(|r| vec![r]).or_else(|| rho_sweep.clone());
            tune(cli, file, rho, *multistage)
        }
        Command::Bench { problems } => bench(cli, problems.as_deref()),
        Command::Validate { file, params, tol } => validate(cli, file, params.as_deref(), *tol),
    }
}

fn resolve(cli: &Cli, file: &Path, rho: Option<Vec<f64>>, default_runs: usize) -> Result<Resolved> {
    let pf = ProblemFile::load(file)?;
    let ov = Overrides {
        seed: cli.seed,
        runs: cli.runs,
        rho,
    };
    pf.resolve(&file.display().to_string(), &ov, default_runs)
        .with_context(|| format!("in problem file {}", file.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn check_validation(block: &ValidationBlock, tol: f64) -> Outcome {
    if block.relative_error <= tol {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "Monte-Carlo variance {:.6e} differs from the analytic {:.6e} by {:.2}% (tolerance {:.2}%)",
            block.estimate,
            block.analytic,
            100.0 * block.relative_error,
            100.0 * tol
        ))
    }
}

fn mc_check(r: &Resolved, x: &[f64]) -> Result<ValidationBlock> {
    if x.len() != 3 {
        bail!("expected 3 controller parameters, got {}", x.len());
    }
    let block = match &r.model {
        LoopModel::Single(p) => validate_single(p, &ReducedPidParams::from_slice(x), &r.mc)?,
        LoopModel::Cascade(p) => validate_cascade(p, &CascadeParams::from_slice(x), &r.mc)?,
    };
    Ok(block)
}

fn validation_csv(b: &ValidationBlock) -> String {
    let mode = match b.mode {
        None => String::new(),
        Some(m) => serde_json::to_value(m)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    };
    format!(
        "mode,samples,burn_in,seed,estimate,standard_error,analytic,relative_error\n\
         {mode},{},{},{},{:e},{:e},{:e},{:e}\n",
        b.samples, b.burn_in, b.seed, b.estimate, b.standard_error, b.analytic, b.relative_error
    )
}

fn print_validation(b: &ValidationBlock) {
    println!(
        "monte carlo    {:.6e} +/- {:.2e} over {} samples (analytic {:.6e}, rel err {:.3}%)",
        b.estimate,
        b.standard_error,
        b.samples - b.burn_in,
        b.analytic,
        100.0 * b.relative_error
    );
}

fn assess(cli: &Cli, file: &Path, validate: bool, tol: f64) -> Result<Outcome> {
    let r = resolve(cli, file, None, 30)?;
    let mut report = match &r.model {
        LoopModel::Single(p) => assess_single(p, &r.tlbo, r.runs)?,
        LoopModel::Cascade(p) => assess_cascade(p, &r.tlbo, r.runs)?,
    };
    let mut outcome = Outcome::Pass;
    if validate {
        let block = mc_check(&r, &report.best_params)?;
        outcome = check_validation(&block, tol);
        report.validation = Some(block);
    }

    let body = json(&Envelope {
        command: "assess",
        version: env!("CARGO_PKG_VERSION"),
        config: &r,
        result: &report,
    })?;
    let csv = format!("{}\n{}\n", AssessmentReport::csv_header(), report.csv_row());
    write(&cli.out, "assessment.json", &body)?;
    write(&cli.out, "assessment.csv", &csv)?;

    match cli.format {
        Some(Format::Json) => print!("{body}"),
        Some(Format::Csv) => print!("{csv}"),
        None => {
            let kind = match r.model {
                LoopModel::Single(_) => "single loop, PID",
                LoopModel::Cascade(_) => "cascade, PI/P",
            };
            println!(
                "{kind}: p = {}, {} runs from seed {}",
                r.truncation, r.runs, r.seed
            );
            if let Some(mv) = report.mv {
                println!("MV             {mv:.6e}");
            }
            println!(
                "MOV            {:.6e} (best of {}; mean {:.6e}, std {:.2e}, worst {:.6e})",
                report.mov.best,
                report.runs.len(),
                report.mov.mean,
                report.mov.std,
                report.mov.worst
            );
            if let Some(eta) = report.performance_index {
                println!("eta            {eta:.4}");
            }
            println!("best params    {}", fmt_vec(&report.best_params));
            if let Some(b) = &report.validation {
                print_validation(b);
            }
        }
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct TuneRow<'a> {
    #[serde(flatten)]
    report: &'a TuningReport,
    step_file: String,
}

#[derive(Serialize)]
struct MultistageSummary {
    file: &'static str,
    iae: f64,
    overshoot_pct: f64,
    unstable: bool,
    stages: Vec<StageCriteria>,
}

#[derive(Serialize)]
struct TuneResult<'a> {
    reports: Vec<TuneRow<'a>>,
    multistage: Option<MultistageSummary>,
}

fn step_file(i: usize, rho: f64) -> String {
    format!("step_{i:02}_rho_{rho:e}.csv")
}

fn multistage_csv(rec: &MultistageRecord) -> String {
    let mut s = String::from("time,setpoint,output,stage\n");
    let resp = &rec.response;
    for (t, ((time, r), y)) in resp.time.iter().zip(&resp.setpoint).zip(&resp.output).enumerate() {
        let stage = rec
            .stages
            .iter()
            .rposition(|c| c.start <= t)
            .unwrap_or(0);
        s.push_str(&format!("{time},{r},{y},{stage}\n"));
    }
    s
}

fn params_label(p: &ControllerParams) -> &'static str {
    match p {
        ControllerParams::Pid(_) => "k1,k2,k3",
        ControllerParams::PiP(_) => "k4,k5,k6",
    }
}

fn tune(cli: &Cli, file: &Path, rho: Option<Vec<f64>>, multistage: bool) -> Result<Outcome> {
    let r = resolve(cli, file, rho, 5)?;
    let base = r.tuning_problem(0.0);
    if let Some(w) = base.horizon_warning() {
        eprintln!("warning: {w}");
    }
    let reports = tune_sweep(&base, &r.tuning.rho, &r.tlbo, r.runs)?;

    let mut rows = Vec::with_capacity(reports.len());
    let mut csv = String::new();
    for (i, rep) in reports.iter().enumerate() {
        let name = step_file(i, rep.rho);
        if let Some(resp) = &rep.response {
            write(&cli.out, &name, &resp.to_csv())?;
        }
        if csv.is_empty() {
            csv = format!(
                "rho,{},objective,variance,iae,overshoot_pct,settling_time,final_error,stable,converged,seed,step_file\n",
                params_label(&rep.params)
            );
        }
        let k = rep.params.to_vec();
        csv.push_str(&format!(
            "{:e},{},{},{},{:e},{:e},{},{},{},{:e},{},{},{},{}\n",
            rep.rho,
            k[0],
            k[1],
            k[2],
            rep.objective,
            rep.variance,
            rep.iae,
            rep.overshoot_pct,
            rep.settling_time.map(|t| t.to_string()).unwrap_or_default(),
            rep.final_error,
            rep.stable,
            rep.converged,
            rep.seed,
            name
        ));
        rows.push(TuneRow {
            report: rep,
            step_file: name,
        });
    }

    let mut staged = None;
    if multistage {
        let mut stages = r.stages();
        if stages.is_empty() {
            let n = reports.len();
            stages = reports
                .iter()
                .enumerate()
                .map(|(i, rep)| Stage {
                    params: rep.params,
                    start: i * r.tuning.horizon / n,
                })
                .collect();
        }
        let rec = simulate_multistage(&base, &stages).context("multistage simulation")?;
        write(&cli.out, "multistage.csv", &multistage_csv(&rec))?;
        staged = Some(MultistageSummary {
            file: "multistage.csv",
            iae: rec.response.iae,
            overshoot_pct: rec.response.overshoot_pct,
            unstable: rec.response.unstable,
            stages: rec.stages,
        });
    }

    let result = TuneResult {
        reports: rows,
        multistage: staged,
    };
    let body = json(&Envelope {
        command: "tune",
        version: env!("CARGO_PKG_VERSION"),
        config: &r,
        result: &result,
    })?;
    write(&cli.out, "tuning.json", &body)?;
    write(&cli.out, "tuning.csv", &csv)?;

    match cli.format {
        Some(Format::Json) => print!("{body}"),
        Some(Format::Csv) => print!("{csv}"),
        None => {
            println!(
                "{:>10}  {:<30}  {:>12}  {:>12}  {:>10}  stable",
                "rho", "params", "variance", "iae", "overshoot%"
            );
            for rep in &reports {
                println!(
                    "{:>10.3e}  {:<30}  {:>12.4e}  {:>12.4e}  {:>10.2}  {}",
                    rep.rho,
                    fmt_vec(&rep.params.to_vec()),
                    rep.variance,
                    rep.iae,
                    rep.overshoot_pct,
                    rep.stable
                );
            }
            if let Some(m) = &result.multistage {
                println!(
                    "multistage: {} stages, iae {:.4e}, overshoot {:.2}%",
                    m.stages.len(),
                    m.iae,
                    m.overshoot_pct
                );
            }
            println!("reports in {}", cli.out.display());
        }
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    runs: usize,
    seed: u64,
    problems: &'a [usize],
    tlbo: &'a TlboConfig,
}

fn bench(cli: &Cli, problems: Option<&[usize]>) -> Result<Outcome> {
    let all: Vec<usize> = (1..=10).collect();
    let ids = problems.unwrap_or(&all);
    let runs = cli.runs.unwrap_or(30);
    let seed = cli.seed.unwrap_or(0);
    let cfg = TlboConfig::new(3).with_seed(seed);
    let suite: SuiteReport = run_benchmark_suite(&cfg, runs, ids)?;

    let config = BenchConfig {
        runs,
        seed,
        problems: ids,
        tlbo: &cfg,
    };
    let body = json(&Envelope {
        command: "bench",
        version: env!("CARGO_PKG_VERSION"),
        config: &config,
        result: &suite,
    })?;
    let csv = suite.to_csv();
    let md = suite.to_markdown();
    write(&cli.out, "bench.json", &body)?;
    write(&cli.out, "bench.csv", &csv)?;
    write(&cli.out, "bench.md", &md)?;

    match cli.format {
        Some(Format::Json) => print!("{body}"),
        Some(Format::Csv) => print!("{csv}"),
        None => print!("{md}"),
    }
    let failed: Vec<String> = suite
        .rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.id.to_string())
        .collect();
    if failed.is_empty() {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Fail(format!(
            "problems {} outside the reference tolerances",
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct ValidateResult {
    params: Vec<f64>,
    tolerance: f64,
    passed: bool,
    validation: ValidationBlock,
}

fn validate(cli: &Cli, file: &Path, params: Option<&[f64]>, tol: f64) -> Result<Outcome> {
    let r = resolve(cli, file, None, 5)?;
    let x = match params {
        Some(p) => p.to_vec(),
        None => match &r.model {
            LoopModel::Single(p) => assess_single(p, &r.tlbo, r.runs)?.best_params,
            LoopModel::Cascade(p) => assess_cascade(p, &r.tlbo, r.runs)?.best_params,
        },
    };
    let block = mc_check(&r, &x)?;
    let outcome = check_validation(&block, tol);
    let result = ValidateResult {
        params: x.clone(),
        tolerance: tol,
        passed: matches!(outcome, Outcome::Pass),
        validation: block,
    };
    let body = json(&Envelope {
        command: "validate",
        version: env!("CARGO_PKG_VERSION"),
        config: &r,
        result: &result,
    })?;
    let csv = validation_csv(&block);
    write(&cli.out, "validation.json", &body)?;
    write(&cli.out, "validation.csv", &csv)?;

    match cli.format {
        Some(Format::Json) => print!("{body}"),
        Some(Format::Csv) => print!("{csv}"),
        None => {
            println!("params         {}", fmt_vec(&x));
            print_validation(&block);
        }
    }
    Ok(outcome)
}
