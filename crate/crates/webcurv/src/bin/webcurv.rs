//! Command-line front end: analyze model files, run verification suites,
//! fit holonomy loop coefficients.  All reports are JSON; exit codes are
//! 0 = ok, 1 = input error, 2 = domain/degeneracy error, 3 = verification
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use webcurv::holonomy::{fit_loop_coefficient, LoopFit};
use webcurv::modelfile::{ModelFile, ModelFileError};
use webcurv::par::{configure_jobs, par_map};
use webcurv::suites::{run_suite, CriterionResult, SuiteOptions, SUITE_NAMES};
use webcurv::webgeom::{
    cartan_residual, curvature_report, flatness_cross_ratio, ricci, CurvatureReport, WebModel,
};
use webcurv::{holonomy, models, suites};

const EXIT_INPUT: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "webcurv",
    version,
    about = "Curvature invariants of bi-Lagrangian 2-webs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate connection, curvature and flatness tests at probe points.
    Analyze {
        /// JSON model file.
        #[arg(long)]
        model: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra probe points: coordinates comma-separated, points
        /// semicolon-separated, e.g. "0,0;0.1,-0.2".
        #[arg(long)]
        points: Option<String>,
        /// Uniform grid with this many points per axis over probe.window.
        #[arg(long)]
        grid: Option<usize>,
        /// Worker threads for independent point evaluations.
        #[arg(long)]
        jobs: Option<usize>,
        /// Highest derivative order carried by the jet pipeline (>= 3).
        #[arg(long, default_value_t = 3)]
        jet_order: usize,
    },
    /// Run a verification suite and report pass/fail per criterion.
    Verify {
        /// One of: sphere, product, cjk, tangent, quad, holonomy, potential,
        /// symmetries, all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Random trials per criterion (where applicable).
        #[arg(long)]
        trials: Option<usize>,
        /// Restrict the cjk suite to a single leaf dimension.
        #[arg(long)]
        n: Option<usize>,
        /// Seed for the ChaCha8 sample streams.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Write the JSON report here (summary always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the cubic holonomy loop coefficient of a 2D model.
    Holonomy {
        /// JSON model file (leaf dimension 1).
        #[arg(long)]
        model: PathBuf,
        /// Base point "x,y".
        #[arg(long, default_value = "0,0")]
        point: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Calibration constants embedded in every report so downstream comparisons
/// are reproducible.
#[derive(Serialize)]
struct CalibrationInfo {
    xi_sign: f64,
    tangent_kappa_sign: f64,
    cjk_scale: [f64; 5],
    tangent_c00_exponents: [i32; 3],
    tangent_c00_scale: f64,
    sphere_omega_f_sign: f64,
    paper_kappa12_per_kappa: f64,
    loop_coeff_per_kappa: f64,
}

impl CalibrationInfo {
    fn current() -> Self {
        CalibrationInfo {
            xi_sign: models::calibration::XI_SIGN,
            tangent_kappa_sign: models::calibration::TANGENT_KAPPA_SIGN,
            cjk_scale: models::calibration::CJK_SCALE,
            tangent_c00_exponents: models::calibration::TANGENT_C00_EXPONENTS,
            tangent_c00_scale: models::calibration::TANGENT_C00_SCALE,
            sphere_omega_f_sign: suites::calibration::SPHERE_OMEGA_F_SIGN,
            paper_kappa12_per_kappa: suites::calibration::PAPER_KAPPA12_PER_KAPPA,
            loop_coeff_per_kappa: holonomy::calibration::LOOP_COEFF_PER_KAPPA,
        }
    }
}

#[derive(Serialize)]
struct PointReport {
    #[serde(flatten)]
    curvature: CurvatureReport,
    cross_ratio_residual: f64,
    cartan_residual: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    toolkit_version: &'static str,
    command: &'static str,
    wall_time_ms: f64,
    calibration: CalibrationInfo,
    model_kind: String,
    leaf_dim: usize,
    jet_order: usize,
    points: Vec<PointReport>,
}

#[derive(Serialize)]
struct VerifyReport {
    toolkit_version: &'static str,
    command: &'static str,
    wall_time_ms: f64,
    calibration: CalibrationInfo,
    suite: String,
    seed: u64,
    passed: bool,
    criteria: Vec<CriterionResult>,
}

#[derive(Serialize)]
struct HolonomyReport {
    toolkit_version: &'static str,
    command: &'static str,
    wall_time_ms: f64,
    calibration: CalibrationInfo,
    kappa: f64,
    /// Fitted coefficient divided by the symmetric-sum Ricci coefficient
    /// κ₁₂ = κ/2; the Taylor law predicts 2.
    taylor_factor: f64,
    fit: LoopFit,
}

enum CliError {
    Input(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Domain(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn domain_err(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn model_file_err(e: ModelFileError) -> CliError {
    CliError::Input(e.to_string())
}

fn parse_point_list(text: &str, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::new();
    for chunk in text.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let p: Result<Vec<f64>, _> = chunk.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let p = p.map_err(|e| input_err(format!("bad point `{chunk}`: {e}")))?;
        if p.len() != dim {
            return Err(input_err(format!(
                "point `{chunk}` has {} coordinates, model needs {dim}",
                p.len()
            )));
        }
        out.push(p);
    }
    Ok(out)
}

fn emit(report: &impl Serialize, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(input_err)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| input_err(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_analyze(
    model_path: &PathBuf,
    out: Option<&PathBuf>,
    points_flag: Option<&String>,
    grid: Option<usize>,
    jobs: Option<usize>,
    jet_order: usize,
) -> Result<(), CliError> {
    let start = Instant::now();
    if jet_order < 3 {
        return Err(input_err(format!(
            "jet order {jet_order} too low: curvature 2-forms need order >= 3"
        )));
    }
    configure_jobs(jobs);
    let mf = ModelFile::load(model_path).map_err(model_file_err)?;
    let model = mf.build().map_err(model_file_err)?;
    let dim = 2 * model.leaf_dim();
    let mut points = mf.probe_points(&model).map_err(model_file_err)?;
    if let Some(text) = points_flag {
        points.extend(parse_point_list(text, dim)?);
    }
    if let Some(per_axis) = grid {
        points.extend(mf.grid_points(&model, per_axis).map_err(model_file_err)?);
    }
    if points.is_empty() {
        return Err(input_err(
            "no probe points: give probe.points in the model file, --points or --grid",
        ));
    }
    let base = match &mf.probe.window {
        Some(w) if w.len() == dim => w.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect(),
        _ => vec![0.0; dim],
    };
    let per_point = par_map(&points, |p| -> Result<PointReport, String> {
        let curvature = curvature_report(&model, p).map_err(|e| e.to_string())?;
        let cross = flatness_cross_ratio(&model, p, &base).map_err(|e| e.to_string())?;
        let cartan = cartan_residual(&model, p).map_err(|e| e.to_string())?;
        Ok(PointReport {
            curvature,
            cross_ratio_residual: cross,
            cartan_residual: cartan,
        })
    });
    let mut reports = Vec::with_capacity(per_point.len());
    for r in per_point {
        reports.push(r.map_err(domain_err)?);
    }
    let report = AnalyzeReport {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        command: "analyze",
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        calibration: CalibrationInfo::current(),
        model_kind: mf.kind.clone(),
        leaf_dim: model.leaf_dim(),
        jet_order,
        points: reports,
    };
    emit(&report, out)
}

fn cmd_verify(
    suite: &str,
    trials: Option<usize>,
    n: Option<usize>,
    seed: u64,
    jobs: Option<usize>,
    out: Option<&PathBuf>,
) -> Result<bool, CliError> {
    let start = Instant::now();
    configure_jobs(jobs);
    let opt = SuiteOptions { seed, trials, n };
    let criteria = run_suite(suite, &opt).ok_or_else(|| {
        input_err(format!(
            "unknown suite `{suite}`; expected one of {SUITE_NAMES:?} or `quad`"
        ))
    })?;
    for c in &criteria {
        println!("{}", c.summary_line());
        for check in &c.checks {
            println!(
                "    [{}] {}: residual {:.3e} ({} {:.1e})",
                if check.passed { "ok" } else { "FAILED" },
                check.name,
                check.residual,
                if check.at_least { "must exceed" } else { "tol" },
                check.tolerance
            );
        }
        if let Some(e) = &c.error {
            println!("    error: {e}");
        }
    }
    let passed = criteria.iter().all(|c| c.passed);
    let report = VerifyReport {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        command: "verify",
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        calibration: CalibrationInfo::current(),
        suite: suite.to_string(),
        seed,
        passed,
        criteria,
    };
    if out.is_some() {
        emit(&report, out)?;
    }
    Ok(passed)
}

fn cmd_holonomy(
    model_path: &PathBuf,
    point: &str,
    out: Option<&PathBuf>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let mf = ModelFile::load(model_path).map_err(model_file_err)?;
    let model: WebModel = mf.build().map_err(model_file_err)?;
    if model.leaf_dim() != 1 {
        return Err(domain_err(format!(
            "holonomy loops need a 2D web (leaf dimension 1), model has leaf dimension {}",
            model.leaf_dim()
        )));
    }
    let p = parse_point_list(point, 2)?;
    let p = p
        .first()
        .ok_or_else(|| input_err("empty --point"))?
        .clone();
    let base = [p[0], p[1]];
    let fit = fit_loop_coefficient(&model, base).map_err(domain_err)?;
    let kappa = ricci(&model, &p).map_err(domain_err)?[0][0];
    let kappa12 = suites::calibration::PAPER_KAPPA12_PER_KAPPA * kappa;
    let taylor_factor = if kappa12.abs() > 1e-12 {
        fit.c_u / kappa12
    } else {
        f64::NAN
    };
    let report = HolonomyReport {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        command: "holonomy",
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        calibration: CalibrationInfo::current(),
        kappa,
        taylor_factor,
        fit,
    };
    emit(&report, out)
}

fn main() -> ExitCode {
    // route clap usage errors through exit code 1 (input error) while
    // keeping --help/--version at 0
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let outcome = match &cli.cmd {
        Cmd::Analyze {
            model,
            out,
            points,
            grid,
            jobs,
            jet_order,
        } => cmd_analyze(model, out.as_ref(), points.as_ref(), *grid, *jobs, *jet_order)
            .map(|_| true),
        Cmd::Verify {
            suite,
            trials,
            n,
            seed,
            jobs,
            out,
        } => cmd_verify(suite, *trials, *n, *seed, *jobs, out.as_ref()),
        Cmd::Holonomy { model, point, out } => {
            cmd_holonomy(model, point, out.as_ref()).map(|_| true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
