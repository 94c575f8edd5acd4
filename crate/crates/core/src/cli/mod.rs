//! Command-line front end: solve problem files and compare run logs.
//!
//! ```text
//! shiftqp run [FILES|DIRS]... [--strategy S] [--opt-tol E] [--fea-tol E]
//!             [--max-iter N] [--trace] [--out DIR] [--expect FILE]
//! shiftqp profile LOG_A LOG_B [--out DIR] [--label-a A] [--label-b B]
//! ```
//!
//! `run` writes `runlog.csv`, one `<name>.sol` per problem and, with
//! `--trace`, one `<name>.trace.csv`. It exits with 0 when every problem ends
//! optimal or with an infeasibility verdict (matching `--expect` if given),
//! 1 otherwise, and 2 on usage or I/O errors. `profile` writes `profile.csv`
//! and `factors.csv`.

pub mod format;
pub mod profile;
pub mod runlog;

use crate::driver::{solve_pdqp_traced, PdqpSolution, SolveStatus, SolverConfig, Strategy};
use crate::model::{DirectionKind, Vector};
use crate::trace::{NullSink, TraceEvent, TraceSink, VecSink};
use clap::{Args, Parser, Subcommand};
use format::{parse_str, ParseError, ProblemFile};
use runlog::{parse_expectations, read_runlog, write_runlog, RunRow, ERROR_STATUS};
use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_owned(), source }
}

#[derive(Debug, Parser)]
#[command(name = "shiftqp", version, about = "Shifted primal-dual active-set QP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve problem files and write a run log.
    Run(RunArgs),
    /// Build performance profiles from two run logs.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Problem files, or directories searched for `*.qpt`.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// auto, primal-first, dual-first, primal-only or dual-only.
    #[arg(long, default_value = "auto")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1e-6)]
    pub opt_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub fea_tol: f64,
    /// Outer iterations allowed across both stages.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Also write a per-subiteration trace for each problem.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, default_value = "shiftqp-out")]
    pub out: PathBuf,
    /// File of `name status` lines the results must match.
    #[arg(long)]
    pub expect: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    pub log_a: PathBuf,
    pub log_b: PathBuf,
    #[arg(long, default_value = "profile-out")]
    pub out: PathBuf,
    #[arg(long, default_value = "A")]
    pub label_a: String,
    #[arg(long, default_value = "B")]
    pub label_b: String,
}

/// Read and parse one problem file.
pub fn parse_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_str(&text).map_err(|source| CliError::Parse { path: path.to_owned(), source })
}

fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "qpt"))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::Io { path: p.clone(), source: std::io::Error::from(std::io::ErrorKind::NotFound) });
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "problem".to_owned(), |s| s.to_string_lossy().into_owned())
}

fn push_vector(out: &mut String, label: &str, v: &Vector) {
    out.push_str(label);
    out.push('\n');
    let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    out.push_str(&vals.join(" "));
    out.push('\n');
}

/// Text of a `.sol` file.
pub fn solution_text(name: &str, sol: &PdqpSolution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {name}");
    let _ = writeln!(out, "status {}", sol.status);
    let _ = writeln!(out, "strategy {}", sol.inner.strategy);
    let _ = writeln!(out, "objective {:?}", sol.objective);
    push_vector(&mut out, "x", &sol.x);
    push_vector(&mut out, "y", &sol.y);
    push_vector(&mut out, "z", &sol.z);
    out
}

/// Trace events as CSV; indices refer to the standard-form variables
/// (problem variables first, then one slack per row).
pub fn trace_csv(events: &[TraceEvent]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "event",
        "stage",
        "method",
        "iteration",
        "subiteration",
        "kind",
        "freed",
        "blocking",
        "alpha",
        "dx_l",
        "dz_l",
        "violation",
        "objective_before",
        "objective_after",
        "status",
    ])?;
    let f = |x: f64| format!("{x:?}");
    for e in events {
        match e {
            TraceEvent::Step(s) => {
                let kind = match s.kind {
                    DirectionKind::Base => "base",
                    DirectionKind::Intermediate => "intermediate",
                };
                w.write_record([
                    "step".to_owned(),
                    s.stage.to_string(),
                    s.method.name().to_owned(),
                    s.iteration.to_string(),
                    s.subiteration.to_string(),
                    kind.to_owned(),
                    s.freed.to_string(),
                    s.blocking.map_or(String::new(), |k| k.to_string()),
                    f(s.alpha),
                    f(s.dx_l),
                    f(s.dz_l),
                    f(s.violation),
                    f(s.objective_before),
                    f(s.objective_after),
                    String::new(),
                ])?;
            }
            TraceEvent::Stage(s) => {
                w.write_record([
                    "stage".to_owned(),
                    s.stage.to_string(),
                    s.method.name().to_owned(),
                    s.iterations.to_string(),
                    s.subiterations.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    f(s.primal_objective),
                    f(s.dual_objective),
                    s.status.clone(),
                ])?;
            }
            TraceEvent::Boundary(_) => {}
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(std::io::Error::other(e.to_string())))
}

/// Result of `run` over a corpus.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
    /// One message per problem whose outcome is not acceptable.
    pub mismatches: Vec<String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Solve every input, write the outputs under `args.out` and judge the
/// statuses.
pub fn run(args: &RunArgs) -> Result<RunReport, CliError> {
    let expectations = match &args.expect {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Some(parse_expectations(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let inputs = collect_inputs(&args.paths)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let config =
        SolverConfig { eps_opt: args.opt_tol, eps_fea: args.fea_tol, max_iter: args.max_iter, strategy: args.strategy };
    let mut rows = Vec::with_capacity(inputs.len());
    let mut mismatches = Vec::new();
    let mut names = BTreeSet::new();
    for path in &inputs {
        let parsed = parse_problem(path);
        let name = match &parsed {
            Ok(ProblemFile { name: Some(n), .. }) => n.clone(),
            _ => stem(path),
        };
        if !names.insert(name.clone()) {
            return Err(CliError::Invalid(format!("{}: duplicate problem name `{name}`", path.display())));
        }
        let mut row = RunRow {
            name: name.clone(),
            n: 0,
            m: 0,
            status: ERROR_STATUS.to_owned(),
            objective: None,
            strategy: args.strategy.to_string(),
            stage1_iters: 0,
            stage2_iters: 0,
            subiters: 0,
            millis: 0.0,
        };
        match parsed {
            Err(e) => mismatches.push(e.to_string()),
            Ok(file) => {
                row.n = file.problem.nvars();
                row.m = file.problem.ncons();
                let mut vec_sink = VecSink::default();
                let sink: &mut dyn TraceSink = if args.trace { &mut vec_sink } else { &mut NullSink };
                let start = Instant::now();
                let result = solve_pdqp_traced(&file.problem, &config, sink);
                row.millis = (start.elapsed().as_secs_f64() * 1e6).round() / 1e3;
                match result {
                    Err(e) => mismatches.push(format!("{name}: {e}")),
                    Ok(sol) => {
                        row.status = sol.status.to_string();
                        row.objective = (sol.status == SolveStatus::Optimal).then_some(sol.objective);
                        row.strategy = sol.inner.strategy.to_string();
                        row.stage1_iters = sol.inner.stage_iterations(1);
                        row.stage2_iters = sol.inner.stage_iterations(2);
                        row.subiters = sol.inner.total_subiterations();
                        let sol_path = args.out.join(format!("{name}.sol"));
                        fs::write(&sol_path, solution_text(&name, &sol)).map_err(io_err(&sol_path))?;
                        if args.trace {
                            let trace_path = args.out.join(format!("{name}.trace.csv"));
                            let bytes = trace_csv(&vec_sink.events).map_err(csv_err(&trace_path))?;
                            fs::write(&trace_path, bytes).map_err(io_err(&trace_path))?;
                        }
                    }
                }
            }
        }
        if row.status != ERROR_STATUS {
            match &expectations {
                Some(exp) => match exp.get(&name) {
                    None => mismatches.push(format!("{name}: no expected status")),
                    Some(want) if want.name() != row.status => {
                        mismatches.push(format!("{name}: expected {want}, got {}", row.status))
                    }
                    Some(_) => {}
                },
                None if !row.solved() => mismatches.push(format!("{name}: {}", row.status)),
                None => {}
            }
        }
        rows.push(row);
    }
    let log_path = args.out.join("runlog.csv");
    let file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    write_runlog(file, &rows).map_err(csv_err(&log_path))?;
    Ok(RunReport { rows, mismatches })
}

fn read_log(path: &Path) -> Result<Vec<RunRow>, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_runlog(file).map_err(csv_err(path))
}

/// Compare two logs and write `profile.csv` and `factors.csv` under `args.out`.
pub fn profile_logs(args: &ProfileArgs) -> Result<profile::ProfileData, CliError> {
    let a = read_log(&args.log_a)?;
    let b = read_log(&args.log_b)?;
    let data = profile::profile(&a, &b, (&args.label_a, &args.label_b)).map_err(CliError::Invalid)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let path = args.out.join("profile.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["solver", "tau", "fraction"]).map_err(csv_err(&path))?;
    for s in &data.steps {
        w.write_record([s.solver.clone(), format!("{:?}", s.tau), format!("{:?}", s.fraction)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let path = args.out.join("factors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["problem", "factor", "failed"]).map_err(csv_err(&path))?;
    for f in &data.factors {
        w.write_record([f.problem.clone(), format!("{:?}", f.factor), f.failure.name().to_owned()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(data)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Run(a) => match run(&a) {
            Ok(report) => {
                for m in &report.mismatches {
                    eprintln!("{m}");
                }
                eprintln!(
                    "{} problem(s), {} unexpected; log at {}",
                    report.rows.len(),
                    report.mismatches.len(),
                    a.out.join("runlog.csv").display()
                );
                i32::from(!report.success())
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Profile(a) => match profile_logs(&a) {
            Ok(_) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    }
}
