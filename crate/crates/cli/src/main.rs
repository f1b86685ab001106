//! Command-line front end: solve problem files, run registered scenarios and
//! check duality identities.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drnormal::duality::{psi, psi_inv_tolerance, psi_inv_with_tolerance, self_duality_deviation};
use drnormal::io::{ProblemFile, ReportFile, ScenarioRecord};
use drnormal::scenarios::{self, run_scenario, DEFAULT_SEED};
use drnormal::splitting::{
    solve_normal, solve_normal_traced, solve_perturbed, solve_perturbed_traced, IterationTrace, OperatorPair,
    SolveReport, SolveStatus, SolverOptions,
};
use drnormal::Vector;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_FIXED_POINT: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

/// Largest deviation accepted by `duality-check`.
const DUALITY_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "drnormal", version)]
#[command(about = "Normal solutions of monotone inclusions via Douglas–Rachford iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the normal (or a w-perturbed) problem described by a JSON file
    Solve {
        /// Path to the problem file
        path: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Run a registered scenario and compare against its reference answer
    Scenario {
        /// Scenario name; `list` prints the registry
        name: String,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Check that the dual pair has the same DR operator and that the
    /// primal–dual bijection round-trips at the computed fixed point
    DualityCheck {
        /// Path to the problem file
        path: PathBuf,
        /// Number of sampled points
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        flags: SolveFlags,
    },
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// Iteration budget per phase
    #[arg(long)]
    max_iter: Option<usize>,
    /// Window tolerance for the displacement-vector estimate
    #[arg(long)]
    tol_v: Option<f64>,
    /// Fixed-point residual tolerance
    #[arg(long)]
    tol_fix: Option<f64>,
    /// Starting point, comma separated
    #[arg(long, value_parser = parse_vector)]
    x0: Option<Vector>,
    /// Solve the w-perturbed problem instead of the normal problem
    #[arg(long, value_parser = parse_vector)]
    w: Option<Vector>,
    /// Write the iteration trace as CSV
    #[arg(long, value_name = "PATH.csv")]
    trace: Option<PathBuf>,
    /// Seed for sampled points and generated scenarios
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

fn parse_vector(s: &str) -> std::result::Result<Vector, String> {
    let entries = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Vector::new(entries).map_err(|e| e.to_string())
}

/// A fully resolved solve request.
struct Job {
    pair: OperatorPair,
    w: Option<Vector>,
    x0: Vector,
    opts: SolverOptions,
}

impl Job {
    fn from_problem(problem: &ProblemFile, flags: &SolveFlags) -> Result<Self> {
        let pair = problem.pair().context("invalid problem")?;
        let mut opts = problem.options();
        if let Some(n) = flags.max_iter {
            opts.max_iter = n;
        }
        if let Some(t) = flags.tol_v {
            opts.tol_v = t;
        }
        if let Some(t) = flags.tol_fix {
            opts.tol_fix = t;
        }
        let x0 = flags.x0.clone().unwrap_or_else(|| problem.x0());
        let w = flags.w.clone().or_else(|| problem.w.clone());
        for v in [Some(&x0), w.as_ref()].into_iter().flatten() {
            v.check_dim(pair.dim).context("flag dimension does not match the problem")?;
        }
        Ok(Job { pair, w, x0, opts })
    }

    fn run(&self, trace_path: Option<&Path>) -> Result<SolveReport> {
        let (report, trace) = match (&self.w, trace_path.is_some()) {
            (Some(w), false) => (solve_perturbed(&self.pair, w, &self.x0, &self.opts)?, IterationTrace::default()),
            (Some(w), true) => solve_perturbed_traced(&self.pair, w, &self.x0, &self.opts)?,
            (None, false) => (solve_normal(&self.pair, &self.x0, &self.opts)?, IterationTrace::default()),
            (None, true) => solve_normal_traced(&self.pair, &self.x0, &self.opts)?,
        };
        if let Some(path) = trace_path {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            trace.write_csv(BufWriter::new(file))?;
        }
        Ok(report)
    }
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::NoFixedPointDetected => EXIT_NO_FIXED_POINT,
        SolveStatus::MaxIter => EXIT_MAX_ITER,
    }
}

fn fmt_opt(v: &Option<Vector>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |v| format!("{v:.10}"))
}

fn print_summary(report: &SolveReport) {
    eprintln!("status            {:?}", report.status);
    eprintln!("v estimate        {}", fmt_opt(&report.v_estimate));
    if let Some(r) = report.v_residual {
        eprintln!("v residual        {r:.3e}");
    }
    eprintln!("perturbation      {:.10}", report.perturbation);
    eprintln!("normal solution   {}", fmt_opt(&report.normal_solution));
    eprintln!("dual solution     {}", fmt_opt(&report.dual_solution));
    eprintln!("fixed-pt residual {:.3e}", report.fixed_point_residual);
    eprintln!("iterations        {} ({} estimating v)", report.iterations_used, report.v_iterations);
}

fn emit(file: &ReportFile, json: Option<&Path>) -> Result<()> {
    let text = file.to_json()?;
    match json {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<ProblemFile> {
    ProblemFile::read(path).with_context(|| format!("reading problem {}", path.display()))
}

fn cmd_solve(path: &Path, flags: &SolveFlags) -> Result<u8> {
    let job = Job::from_problem(&load(path)?, flags)?;
    let report = job.run(flags.trace.as_deref())?;
    print_summary(&report);
    let code = status_code(report.status);
    emit(&ReportFile { source: path.display().to_string(), report, scenario: None }, flags.json.as_deref())?;
    Ok(code)
}

fn cmd_scenario(name: &str, flags: &SolveFlags) -> Result<u8> {
    if name == "list" {
        for n in scenarios::REGISTRY {
            println!("{n}");
        }
        return Ok(0);
    }
    let scenario = scenarios::by_name(name, flags.seed)?;
    let problem = ProblemFile {
        dim: scenario.pair.dim,
        a: scenario.pair.a.clone(),
        b: scenario.pair.b.clone(),
        w: None,
        max_iter: None,
        tol_v: None,
        tol_fix: None,
        x0: None,
    };
    let job = Job::from_problem(&problem, flags)?;
    if job.w.is_some() {
        bail!("--w is not supported for scenarios, which always solve the normal problem");
    }
    let outcome = run_scenario(&scenario, &job.x0, &job.opts)?;
    if flags.trace.is_some() {
        job.run(flags.trace.as_deref())?;
    }

    eprintln!("scenario {}  (oracle: {})", scenario.name, scenario.expected.oracle);
    eprintln!("  expected v(A,B)  {}", fmt_opt(&scenario.expected.v));
    eprintln!("  observed v(A,B)  {}", fmt_opt(&outcome.report.v_estimate));
    if scenario.expected.v_swapped.is_some() {
        eprintln!("  expected v(B,A)  {}", fmt_opt(&scenario.expected.v_swapped));
        eprintln!("  observed v(B,A)  {}", fmt_opt(&outcome.v_swapped_estimate));
    }
    eprintln!("  status           {:?}", outcome.report.status);
    eprintln!("  normal solution  {}", fmt_opt(&outcome.report.normal_solution));
    eprintln!("  {:<26} {:>12} {:>12}  result", "check", "deviation", "tolerance");
    for c in &outcome.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("  {:<26} {:>12.3e} {:>12.3e}  {verdict}", c.label, c.deviation, c.tolerance);
    }
    let passed = outcome.passed();
    eprintln!("{}", if passed { "PASS" } else { "FAIL" });

    let file = ReportFile {
        source: format!("scenario:{}", scenario.name),
        report: outcome.report,
        scenario: Some(ScenarioRecord {
            name: scenario.name,
            expected: scenario.expected,
            v_swapped_estimate: outcome.v_swapped_estimate,
            checks: outcome.checks,
        }),
    };
    emit(&file, flags.json.as_deref())?;
    Ok(if passed { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_duality_check(path: &Path, samples: usize, flags: &SolveFlags) -> Result<u8> {
    let job = Job::from_problem(&load(path)?, flags)?;
    let scale = 1.0 + job.x0.norm();
    let points = scenarios::sample_points(job.pair.dim, samples, flags.seed, 3.0 * scale);
    let t_dev = self_duality_deviation(&job.pair, &points)?;
    println!("max |T x - T_dual x| over {samples} points: {t_dev:.3e}");

    let report = job.run(flags.trace.as_deref())?;
    let mut worst = t_dev;
    match (&report.governing_point, &report.normal_solution, &report.dual_solution) {
        (Some(g), Some(z), Some(k)) => {
            let w = &report.perturbation;
            let x = g + w;
            let tol = psi_inv_tolerance(job.opts.tol_fix, &x);
            let zk = psi_inv_with_tolerance(&job.pair, &x, w, tol)?;
            let psi_dev = [psi(&zk).dist(&x), zk.z.dist(z), zk.k.dist(k)].into_iter().fold(0.0, f64::max);
            println!("max Psi round-trip deviation at the fixed point: {psi_dev:.3e}");
            worst = worst.max(psi_dev);
        }
        _ => println!("Psi round trip skipped: solve ended with status {:?}", report.status),
    }
    let passed = worst <= DUALITY_TOL;
    println!("max deviation {worst:.3e} (tolerance {DUALITY_TOL:e}): {}", if passed { "PASS" } else { "FAIL" });
    if let Some(json) = &flags.json {
        emit(&ReportFile { source: path.display().to_string(), report, scenario: None }, Some(json))?;
    }
    Ok(if passed { 0 } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve { path, flags } => cmd_solve(path, flags),
        Command::Scenario { name, flags } => cmd_scenario(name, flags),
        Command::DualityCheck { path, samples, flags } => cmd_duality_check(path, *samples, flags),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
