//! Command-line front end: `validate`, `run` and `study` on scenario files.

mod scenario;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{coarse_levels, convergence_study, derivative_bound_study, DerivativeStudy, StudyResult};
use crate::elliptic::{residual, solve_elliptic_march};
use crate::error::{Error, Result};
use crate::parabolic::{solve_parabolic, verify_max_principle, write_snapshot, TimeGrid};
use crate::validate::{
    check_c_floor, check_gradient_condition, check_monotonicity, check_q_drift, check_q_floor, check_symmetry,
    probe_first_order, probe_higher_order, ValidationReport,
};

pub use scenario::{Built, CheckName, CoefficientSpec, DataSpec, LatticeSpec, Scenario, StencilSpec, StudySpec};

/// Exit status for usage and parse errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "degenfd",
    version,
    about = "Monotone finite-difference schemes for degenerate parabolic equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the structural checks listed in the scenario and print a JSON report.
    Validate {
        scenario: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the scenario on one lattice.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Parabolic)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Proceed even if a structural check fails.
        #[arg(long)]
        force: bool,
    },
    /// Run a refinement study over the scenario's lattice list.
    Study {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        study: StudyKind,
        /// Extrapolation order, overriding `study.k` from the scenario.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Parabolic,
    Elliptic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Convergence,
    Acceleration,
    Derivatives,
}

/// One check on one lattice.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(flatten)]
    pub report: ValidationReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationSummary {
    pub scenario: String,
    pub pass: bool,
    pub reports: Vec<LatticeReport>,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Validate { scenario, out } => cmd_validate(&scenario, out.as_deref()),
        Command::Run {
            scenario,
            mode,
            out,
            force,
        } => cmd_run(&scenario, mode, &out, force),
        Command::Study {
            scenario,
            study,
            k,
            out,
            force,
        } => cmd_study(&scenario, study, k, &out, force),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Scenario(_) | Error::Parse { .. } | Error::Json(_) => EXIT_USAGE,
                _ => 1,
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("DEGENFD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Run every check of `scenario` on each lattice in `sizes`.
pub fn validate_scenario(scenario: &Scenario, sizes: &[usize]) -> Result<ValidationSummary> {
    let built = scenario.build()?;
    let ts = scenario.t_samples();
    let params = scenario.probe_params();
    let bank = if scenario
        .checks
        .iter()
        .any(|c| matches!(c, CheckName::ProbeFirstOrder | CheckName::ProbeHigherOrder))
    {
        Some(scenario.test_bank()?)
    } else {
        None
    };
    let mut reports = Vec::new();
    for &n in sizes {
        let scheme = built.scheme(scenario.dim(), n)?;
        for check in &scenario.checks {
            let report = match check {
                CheckName::Monotonicity => check_monotonicity(&scheme, &ts),
                CheckName::CFloor => check_c_floor(&scheme, built.coeffs.reaction_floor, &ts),
                CheckName::QDrift => check_q_drift(&scheme, &ts),
                CheckName::Symmetry => check_symmetry(&scheme, &ts),
                CheckName::QFloor => {
                    let q_floor = scenario.study.q_floor.expect("checked at build");
                    check_q_floor(&scheme, q_floor, &ts)?
                }
                CheckName::GradientCondition => {
                    check_gradient_condition(&scheme, scenario.study.order, scenario.study.slack, &ts)?
                }
                CheckName::ProbeFirstOrder => probe_first_order(&scheme, &params, bank.as_ref().expect("bank"), &ts)?,
                CheckName::ProbeHigherOrder => probe_higher_order(&scheme, &params, bank.as_ref().expect("bank"), &ts)?,
            };
            reports.push(LatticeReport { n, report });
        }
    }
    Ok(ValidationSummary {
        scenario: scenario.name.clone(),
        pass: reports.iter().all(|r| r.report.pass),
        reports,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn cmd_validate(path: &Path, out: Option<&Path>) -> Result<i32> {
    let scenario = Scenario::load(path)?;
    let summary = validate_scenario(&scenario, &scenario.validation_sizes())?;
    let json = to_json(&summary)?;
    print!("{json}");
    if let Some(out) = out {
        fs::write(out, &json)?;
    }
    Ok(if summary.pass { 0 } else { 1 })
}

/// Validate before solving; `Some(1)` means the caller should stop.
fn gate(scenario: &Scenario, sizes: &[usize], force: bool) -> Result<Option<i32>> {
    let summary = validate_scenario(scenario, sizes)?;
    if summary.pass {
        return Ok(None);
    }
    for r in summary.reports.iter().filter(|r| !r.report.pass) {
        eprintln!(
            "check {} failed on N = {}: margin {:e} at x = {:?}, t = {}",
            r.report.name, r.n, r.report.margin, r.report.witness.x, r.report.witness.t
        );
    }
    if force {
        eprintln!("continuing because of --force");
        Ok(None)
    } else {
        eprintln!("refusing to run; pass --force to override");
        Ok(Some(1))
    }
}

#[derive(Serialize)]
struct ParabolicRunInfo<'a> {
    scenario: &'a str,
    mode: &'static str,
    #[serde(rename = "N")]
    n: usize,
    h: f64,
    dt: f64,
    steps: usize,
    integrator: crate::parabolic::Integrator,
    t_final: f64,
    snapshot_times: Vec<f64>,
    snapshot_files: Vec<String>,
    sup: f64,
    min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_sup: Option<f64>,
}

#[derive(Serialize)]
struct EllipticRunInfo<'a> {
    scenario: &'a str,
    mode: &'static str,
    #[serde(rename = "N")]
    n: usize,
    h: f64,
    dt: f64,
    steps: usize,
    residual: f64,
    /// `sup |v| <= sup |f| / reaction_floor` slack.
    bound_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_sup: Option<f64>,
}

fn cmd_run(path: &Path, mode: Mode, out: &Path, force: bool) -> Result<i32> {
    let scenario = Scenario::load(path)?;
    let built = scenario.build()?;
    let n = scenario.run_n().expect("checked at build");
    if let Some(code) = gate(&scenario, &[n], force)? {
        return Ok(code);
    }
    fs::create_dir_all(out)?;
    let scheme = built.scheme(scenario.dim(), n)?;
    match mode {
        Mode::Parabolic => {
            let grid = TimeGrid::default_for(&scheme, scenario.t_final)?;
            let run = solve_parabolic(&scheme, &built.data, &grid, scenario.integrator, &scenario.snapshots)?;
            let mut files = Vec::new();
            for (i, (_, u)) in run.snapshots.iter().enumerate() {
                let name = format!("snapshot_{i:03}.csv");
                write_snapshot(u, &out.join(&name))?;
                files.push(name);
            }
            write_snapshot(&run.final_state, &out.join("final.csv"))?;
            let error_sup = match &built.exact {
                Some(u0) => Some(
                    run.final_state
                        .dist_sup(&u0.sample(scenario.t_final, scheme.lattice()))?,
                ),
                None => None,
            };
            let info = ParabolicRunInfo {
                scenario: &scenario.name,
                mode: "parabolic",
                n,
                h: scheme.h(),
                dt: grid.dt(),
                steps: grid.steps(),
                integrator: run.integrator,
                t_final: scenario.t_final,
                snapshot_times: run.snapshots.iter().map(|(t, _)| *t).collect(),
                snapshot_files: files,
                sup: run.final_state.max(),
                min: run.final_state.min(),
                error_sup,
            };
            write_file(out, "run.json", &to_json(&info)?)?;
            let ts = scenario.t_samples();
            if check_monotonicity(&scheme, &ts).pass && check_c_floor(&scheme, built.coeffs.reaction_floor, &ts).pass {
                let mp = verify_max_principle(&run, &scheme, &built.data, built.coeffs.reaction_floor)?;
                write_file(out, "max_principle.json", &to_json(&mp)?)?;
            }
            println!("wrote {} (N = {n}, {} steps)", out.display(), grid.steps());
        }
        Mode::Elliptic => {
            let f = &built.data.f;
            let outcome = solve_elliptic_march(&scheme, f, scenario.study.elliptic_tol)?;
            write_snapshot(&outcome.solution, &out.join("solution.csv"))?;
            let bound = f.sample(0.0, scheme.lattice()).sup_abs() / built.coeffs.reaction_floor;
            let error_sup = match &built.exact {
                Some(u0) => Some(outcome.solution.dist_sup(&u0.sample(0.0, scheme.lattice()))?),
                None => None,
            };
            let info = EllipticRunInfo {
                scenario: &scenario.name,
                mode: "elliptic",
                n,
                h: scheme.h(),
                dt: outcome.dt,
                steps: outcome.steps,
                residual: residual(&scheme, f, &outcome.solution)?,
                bound_margin: bound - outcome.solution.sup_abs(),
                error_sup,
            };
            write_file(out, "run.json", &to_json(&info)?)?;
            println!("wrote {} (N = {n}, residual {:e})", out.display(), info.residual);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct DerivativeReport<'a> {
    #[serde(flatten)]
    study: &'a DerivativeStudy,
    ratios: Vec<f64>,
}

fn cmd_study(path: &Path, kind: StudyKind, k: Option<usize>, out: &Path, force: bool) -> Result<i32> {
    let mut scenario = Scenario::load(path)?;
    if let Some(k) = k {
        scenario.study.k = k;
    }
    let built = scenario.build()?;
    let n_list = scenario.n_list();
    if let Some(code) = gate(&scenario, &n_list, force)? {
        return Ok(code);
    }
    fs::create_dir_all(out)?;
    let problem = built.problem(&scenario);
    match kind {
        StudyKind::Convergence => {
            let k = scenario.study.k;
            let result = convergence_study(&problem, k, &coarse_levels(&n_list, k))?;
            write_file(out, "convergence.csv", &result.to_csv())?;
            write_file(out, "convergence.json", &to_json(&result)?)?;
            print_orders(&result);
        }
        StudyKind::Acceleration => {
            let mut all: Vec<StudyResult> = Vec::new();
            for k in 0..=scenario.study.k {
                let result = convergence_study(&problem, k, &coarse_levels(&n_list, k))?;
                write_file(out, &format!("acceleration_k{k}.csv"), &result.to_csv())?;
                print_orders(&result);
                all.push(result);
            }
            write_file(out, "acceleration.json", &to_json(&all)?)?;
        }
        StudyKind::Derivatives => {
            let study = derivative_bound_study(&problem, scenario.study.order as usize, &n_list)?;
            let report = DerivativeReport {
                study: &study,
                ratios: study.ratios(),
            };
            write_file(out, "derivatives.csv", &study.to_csv())?;
            write_file(out, "derivatives.json", &to_json(&report)?)?;
            println!("max/min ratios of sqrt(V_n), n = 0..={}: {:?}", study.m, report.ratios);
        }
    }
    Ok(0)
}

fn print_orders(result: &StudyResult) {
    match result.finest_order() {
        Some(o) => println!("k = {}: observed order on the finest pair {o:.4}", result.k),
        None => println!("k = {}: no observed order (too few levels or roundoff)", result.k),
    }
}
