mod config;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use ibreg::auxfun::{check_decay, AuxFn, AuxOptions};
use ibreg::contour::{make_test_contour, well_stretched_lambda, Contour, ElasticityLaw};
use ibreg::experiments::{
    dynamic_error_study, eps_grid, eps_n_study, leading_term_check, model_problem_check, static_error_study,
    write_reports_csv, OutputDir, StudyKernel,
};
use ibreg::kernels::KernelType;
use ibreg::stepper::{evolve, EvolveConfig, ProblemVariant, Termination};
use ibreg::Error;
use serde_json::json;
use std::process::ExitCode;

const WORKERS_ENV: &str = "IBREG_WORKERS";

#[derive(Parser)]
#[command(name = "ibreg", version, about = "Regularized Stokes contour dynamics and regularization-error studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Build a kernel and write its moment certificate.
    Kernel {
        #[arg(value_parser = ["certify"], default_value = "certify")]
        action: String,
    },
    /// Tabulate the auxiliary functions of a kernel.
    AuxTable,
    /// Static error rates of the regularized velocity.
    StaticError,
    /// Static error with the leading tangential term removed.
    LeadingTerm,
    /// Trajectory error rates of the regularized problem.
    DynamicError,
    /// Error plateau of the band-limited regularized problem.
    EpsN,
    /// Mollification error of a straight forced segment.
    ModelProblem,
    /// Integrate one problem variant and write its trajectory.
    Evolve,
}

enum Failure {
    Invalid(String),
    Aborted(Error),
    /// Aborted after the diagnostics were written.
    Reported(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) | Error::InvalidData(m) => Failure::Invalid(m),
            other => Failure::Aborted(other),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Aborted(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Aborted(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Aborted(e.into())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match RunConfig::load(&cli.overrides) {
        Ok(c) => c,
        Err(m) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Kernel { .. } => kernel(&cfg),
        Command::AuxTable => aux_table(&cfg),
        Command::StaticError => static_error(&cfg),
        Command::LeadingTerm => leading_term(&cfg),
        Command::DynamicError => dynamic_error(&cfg),
        Command::EpsN => eps_n(&cfg),
        Command::ModelProblem => model_problem(&cfg),
        Command::Evolve => evolve_cmd(&cfg),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed; see {}", cfg.output.join("manifest.json").display());
            ExitCode::from(1)
        }
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Reported(e)) => {
            eprintln!("study aborted: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Aborted(e)) => {
            eprintln!("study aborted: {e}");
            let written = OutputDir::create(&cfg.output).and_then(|mut out| {
                let mut f = out.file("diagnostics.json")?;
                serde_json::to_writer_pretty(&mut f, &json!({ "error": e.to_string(), "detail": format!("{e:?}") }))?;
                out.finish("aborted", &cfg, cfg.seed(), false, &json!(null))
            });
            if let Err(w) = written {
                eprintln!("could not write diagnostics: {w}");
            }
            ExitCode::from(3)
        }
    }
}

fn study_kernel(cfg: &RunConfig) -> Result<StudyKernel, Failure> {
    Ok(StudyKernel::new(&cfg.kernel, AuxOptions::default())?)
}

fn contour(cfg: &RunConfig) -> Result<Contour, Failure> {
    Ok(make_test_contour(cfg.contour)?)
}

fn eps_list(cfg: &RunConfig, c: &Contour) -> Vec<f64> {
    cfg.eps.clone().unwrap_or_else(|| eps_grid(well_stretched_lambda(c, 256), cfg.eps_points))
}

fn kernel(cfg: &RunConfig) -> Outcome {
    let built = cfg.kernel.build()?;
    let mut out = OutputDir::create(&cfg.output)?;
    serde_json::to_writer_pretty(out.file("certificate.json")?, &built.certificate)?;
    println!("{}", serde_json::to_string_pretty(&built.certificate)?);
    let passed = match cfg.kernel.kind {
        KernelType::Bump => true,
        KernelType::TwoScale => built.certificate.m1.abs() < cfg.kernel.tolerance.unwrap_or(1e-8),
    };
    out.finish("kernel", cfg, None, passed, &built.certificate)?;
    Ok(passed)
}

fn aux_table(cfg: &RunConfig) -> Outcome {
    let k = study_kernel(cfg)?;
    let mut out = OutputDir::create(&cfg.output)?;
    k.table.write_csv(out.file("aux_table.csv")?)?;
    let decay = check_decay(&k.table);
    let int_f2 = k.table.line_integral(AuxFn::F2)?;
    let int_f3 = k.table.line_integral(AuxFn::F3)?;
    let m1 = k.table.m1();
    let passed = (int_f2 - 4.0 * m1).abs() < 1e-6 && (int_f3 + 4.0 * m1).abs() < 1e-6;
    let results = json!({ "m1": m1, "m2": k.table.m2(), "integral_f2": int_f2, "integral_f3": int_f3, "decay": decay });
    println!("∫f2 = {int_f2:.12} (4 m1 = {:.12}), ∫f3 = {int_f3:.12}", 4.0 * m1);
    out.finish("aux-table", cfg, None, passed, &results)?;
    Ok(passed)
}

fn static_error(cfg: &RunConfig) -> Outcome {
    let k = study_kernel(cfg)?;
    let c = contour(cfg)?;
    let law = ElasticityLaw::from(cfg.law);
    let eps = eps_list(cfg, &c);
    let study = static_error_study(&c, &law, &k, &eps, cfg.theta, &k.quadrature(cfg.resolution), cfg.check_resolution)?;
    let mut out = OutputDir::create(&cfg.output)?;
    write_reports_csv(&study.reports, out.file("rates.csv")?)?;
    let mut w = csv::Writer::from_writer(out.file("errors.csv")?);
    for r in &study.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    for r in &study.reports {
        println!("{}", r.summary());
    }
    let passed = study.passed() && study.reports.iter().all(|r| r.under_resolved != Some(true));
    out.finish("static-error", cfg, cfg.seed(), passed, &study)?;
    Ok(passed)
}

fn leading_term(cfg: &RunConfig) -> Outcome {
    let k = study_kernel(cfg)?;
    let c = contour(cfg)?;
    let law = ElasticityLaw::from(cfg.law);
    let eps = eps_list(cfg, &c);
    let (raw, corrected) = leading_term_check(&c, &law, &k, &eps, cfg.theta, &k.quadrature(cfg.resolution))?;
    let reports = [raw, corrected];
    let mut out = OutputDir::create(&cfg.output)?;
    write_reports_csv(&reports, out.file("rates.csv")?)?;
    for r in &reports {
        println!("{}", r.summary());
    }
    let passed = reports[1].passed;
    out.finish("leading-term", cfg, cfg.seed(), passed, &reports)?;
    Ok(passed)
}

fn dynamic_error(cfg: &RunConfig) -> Outcome {
    let k = study_kernel(cfg)?;
    let c = contour(cfg)?;
    let eps = eps_list(cfg, &c);
    let (study, _) = dynamic_error_study(&c, &k, &eps, &cfg.dynamic())?;
    let mut out = OutputDir::create(&cfg.output)?;
    write_reports_csv(&study.reports, out.file("rates.csv")?)?;
    let mut w = csv::Writer::from_writer(out.file("errors.csv")?);
    for r in &study.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    for r in &study.reports {
        println!("{}", r.summary());
    }
    let passed = study.passed();
    out.finish("dynamic-error", cfg, cfg.seed(), passed, &study)?;
    Ok(passed)
}

fn eps_n(cfg: &RunConfig) -> Outcome {
    let k = study_kernel(cfg)?;
    let c = contour(cfg)?;
    let eps = match &cfg.eps {
        Some(e) if e.len() == 1 => e[0],
        Some(_) => return Err(Failure::Invalid("eps-n takes a single ε".into())),
        None => cfg.eps_normalized * well_stretched_lambda(&c, 256),
    };
    let n_values = cfg.n_values.clone().unwrap_or_else(|| {
        let mut v: Vec<usize> = std::iter::successors(Some(8usize), |n| Some(n * 2)).take_while(|&n| n < cfg.k_max()).collect();
        v.push(cfg.k_max());
        v
    });
    let report = eps_n_study(&c, &k, eps, &n_values, &cfg.dynamic(), None)?;
    let mut out = OutputDir::create(&cfg.output)?;
    let mut w = csv::Writer::from_writer(out.file("errors.csv")?);
    w.write_record(["n", "h1", "h2"])?;
    for ((n, a), b) in report.n_values.iter().zip(&report.h1_errors).zip(&report.h2_errors) {
        w.write_record([n.to_string(), format!("{a:.17e}"), format!("{b:.17e}")])?;
    }
    w.flush()?;
    println!("plateau at N = {:?}, change {:?}, full-band mismatch {:?}", report.plateau_n, report.plateau_change, report.full_band_mismatch);
    out.finish("eps-n", cfg, cfg.seed(), report.passed, &report)?;
    Ok(report.passed)
}

fn model_problem(cfg: &RunConfig) -> Outcome {
    let built = cfg.kernel.build()?;
    let eps = cfg.eps.clone().unwrap_or_else(|| (0..cfg.eps_points).map(|i| 0.08 * 0.5f64.sqrt().powi(i as i32)).collect());
    let report = model_problem_check(&built, &eps, cfg.force)?;
    let mut out = OutputDir::create(&cfg.output)?;
    let mut w = csv::Writer::from_writer(out.file("errors.csv")?);
    w.write_record(["eps", "tangential", "normal"])?;
    for (e, v) in eps.iter().zip(&report.errors) {
        w.write_record([format!("{e:.17e}"), format!("{:.17e}", v[0]), format!("{:.17e}", v[1])])?;
    }
    w.flush()?;
    println!("{}", report.tangential.summary());
    println!("{}", report.normal.summary());
    let passed = report.passed();
    out.finish("model-problem", cfg, None, passed, &report)?;
    Ok(passed)
}

fn evolve_cmd(cfg: &RunConfig) -> Outcome {
    let c = contour(cfg)?;
    let eps = || cfg.eps.as_ref().and_then(|e| e.first().copied()).ok_or_else(|| Failure::Invalid("this variant needs --eps".into()));
    let variant = match cfg.variant.as_str() {
        "exact" => ProblemVariant::Exact,
        "eps" => ProblemVariant::Regularized { eps: eps()? },
        _ => ProblemVariant::Projected { eps: eps()?, n: cfg.n.ok_or_else(|| Failure::Invalid("eps_n needs --n".into()))? },
    };
    let k = match variant {
        ProblemVariant::Exact => None,
        _ => Some(study_kernel(cfg)?),
    };
    let mut ec = EvolveConfig::new(cfg.dt, cfg.t_final, variant);
    ec.diagnostics_stride = cfg.stride;
    ec.scheme = cfg.scheme;
    ec.law = cfg.law;
    ec.theta = cfg.theta;
    ec.resolution = cfg.resolution;
    if let Some(k) = &k {
        ec.feature_scale = k.built.pair.feature_scale();
    }
    let traj = evolve(&c, &ec, k.as_ref().map(|k| &k.table))?;
    let mut out = OutputDir::create(&cfg.output)?;
    traj.write_csv(out.file("trajectory.csv")?)?;
    if cfg.snapshots {
        for (i, s) in traj.snapshots.iter().enumerate() {
            s.write_csv(out.file(&format!("snapshots/snapshot_{i:04}.csv"))?)?;
        }
    }
    let d = &traj.diagnostics;
    let (a0, a1) = (d[0].area, d[d.len() - 1].area);
    let drift = ((a1 - a0) / a0).abs();
    println!("steps {}, area drift {drift:.3e}, termination {:?}", traj.steps, traj.termination);
    let passed = traj.termination == Termination::Completed && traj.max_stretch_increase <= 1e-8;
    let results = json!({
        "termination": traj.termination,
        "steps": traj.steps,
        "area_drift": drift,
        "max_stretch_increase": traj.max_stretch_increase,
    });
    let aborted = traj.termination.clone().into_result().err();
    if let Some(e) = &aborted {
        let mut f = out.file("diagnostics.json")?;
        serde_json::to_writer_pretty(&mut f, &json!({ "error": e.to_string(), "termination": traj.termination }))?;
    }
    out.finish("evolve", cfg, cfg.seed(), passed, &results)?;
    match aborted {
        Some(e) => Err(Failure::Reported(e)),
        None => Ok(passed),
    }
}
