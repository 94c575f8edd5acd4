//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use common::{
    check_instance, large_strictly_convex, random_general, random_instance, rel, rng, Construction, InstanceReport,
};
use shiftqp::cli::format::{emit, ProblemFile};
use shiftqp::cli::parse_problem;
use shiftqp::cli::profile::{profile, Failure};
use shiftqp::cli::runlog::{read_runlog, write_runlog, RunRow};
use shiftqp::driver::{solve_pdqp, standardize, PdqpSolution, QpSolution, SolveStatus, SolverConfig};
use shiftqp::kkt::{factor_kb, kkt_matrix, solve_base_primal, solve_intermediate_primal};
use shiftqp::model::{check_optimality, Matrix, Partition, QpProblem, Shifts, Vector};
use shiftqp::oracle::{check_direction_properties, enumerate_solve, svd_rank};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

struct Verdict {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.qpt"))
}

fn solve_fixture(name: &str, config: &SolverConfig) -> Result<PdqpSolution, String> {
    let file = parse_problem(&fixture(name)).map_err(|e| e.to_string())?;
    solve_pdqp(&file.problem, config).map_err(|e| e.to_string())
}

/// Shared random corpus for criteria 1 to 5 and part of 8.
struct Corpus {
    reports: Vec<(String, InstanceReport, Option<QpSolution>, QpProblem)>,
    general: Vec<String>,
    general_count: usize,
    elapsed: Duration,
}

const STANDARD_INSTANCES: usize = 600;
const GENERAL_INSTANCES: usize = 200;

fn build_corpus() -> Corpus {
    let start = Instant::now();
    let mut r = rng(2024);
    let cycle = [Construction::Feasible, Construction::Feasible, Construction::Infeasible, Construction::Unbounded];
    let config = SolverConfig::default();
    let mut reports = Vec::with_capacity(STANDARD_INSTANCES);
    for i in 0..STANDARD_INSTANCES {
        let inst = random_instance(&mut r, cycle[i % 4]);
        let (rep, sol) = check_instance(&inst.problem, &config);
        reports.push((format!("#{i} {}", inst.label), rep, sol, inst.problem));
    }
    let mut general = Vec::new();
    let mut r = rng(4048);
    for i in 0..GENERAL_INSTANCES {
        let g = random_general(&mut r);
        let Ok(st) = standardize(&g) else {
            general.push(format!("general #{i}: standardization failed"));
            continue;
        };
        let oracle = match enumerate_solve(&st.problem, &Shifts::zero(st.problem.nvars())) {
            Ok(o) => o,
            Err(e) => {
                general.push(format!("general #{i}: oracle {e}"));
                continue;
            }
        };
        match solve_pdqp(&g, &config) {
            Ok(sol) => {
                let want = common::oracle_status_name(oracle.status);
                let (x, _, _) = st.recover(&oracle.iterate);
                if sol.status != want || (want == SolveStatus::Optimal && rel(sol.objective, g.objective(&x)) > 1e-7) {
                    general.push(format!(
                        "general #{i}: got {} {:e}, oracle {want} {:e}",
                        sol.status,
                        sol.objective,
                        g.objective(&x)
                    ));
                }
            }
            Err(e) => general.push(format!("general #{i}: {e}")),
        }
    }
    Corpus { reports, general, general_count: GENERAL_INSTANCES, elapsed: start.elapsed() }
}

/// `"; first: <item>"` for the first offending item, empty when there is none.
fn first<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items.into_iter().next().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn criterion_1(c: &Corpus) -> Verdict {
    let bad: Vec<String> = c
        .reports
        .iter()
        .filter(|(_, r, _, _)| r.error.is_some() || !r.status_match || !r.objective_match)
        .map(|(l, r, _, _)| format!("{l}: {:?}", r.error))
        .collect();
    let via_general = c.reports.iter().filter(|r| r.1.via_general).count();
    let total = c.reports.len() + c.general_count;
    let pass = bad.is_empty() && c.general.is_empty() && total >= 500 && c.elapsed.as_secs_f64() < 60.0;
    let mut detail = format!(
        "{} of {total} instances match ({via_general} standard instances through the general-form entry), {:.1} s",
        total - bad.len() - c.general.len(),
        c.elapsed.as_secs_f64()
    );
    if !pass {
        detail.push_str(&format!("{}{}", first(&bad), first(&c.general)));
    }
    Verdict { id: 1, title: "oracle equivalence", pass, detail }
}

fn criterion_2(c: &Corpus) -> Verdict {
    let optima: usize = c.reports.iter().map(|r| r.1.stage_optima).sum();
    let bad: Vec<&String> = c.reports.iter().flat_map(|r| r.1.gap_violations.iter()).collect();
    Verdict {
        id: 2,
        title: "duality-gap identity at stage optima",
        pass: bad.is_empty() && optima > 0,
        detail: format!("{optima} stage optima, {} violations{}", bad.len(), first(bad)),
    }
}

fn criterion_3(c: &Corpus) -> Verdict {
    let steps: usize = c.reports.iter().map(|r| r.1.steps).sum();
    let mono: Vec<&String> = c.reports.iter().flat_map(|r| r.1.monotone_violations.iter()).collect();
    let ident: Vec<&String> = c.reports.iter().flat_map(|r| r.1.identity_violations.iter()).collect();
    Verdict {
        id: 3,
        title: "monotone objectives and closed-form step change",
        pass: mono.is_empty() && ident.is_empty() && steps > 0,
        detail: format!(
            "{steps} subiterations, {} monotonicity and {} identity violations{}{}",
            mono.len(),
            ident.len(),
            first(mono),
            first(ident)
        ),
    }
}

fn criterion_4(c: &Corpus) -> Verdict {
    let singular: usize = c.reports.iter().map(|r| r.1.singular_boundaries).sum();
    let errors: Vec<String> =
        c.reports.iter().filter_map(|r| r.1.error.clone()).filter(|e| e.contains("singular")).collect();
    Verdict {
        id: 4,
        title: "every iteration basis factors",
        pass: singular == 0 && errors.is_empty(),
        detail: format!("{singular} singular boundaries, {} singular-solve errors", errors.len()),
    }
}

fn lp_pair() -> QpProblem {
    QpProblem::new(
        Matrix::zeros(2, 2),
        Matrix::zeros(1, 1),
        Matrix::from_row_slice(1, 2, &[1.0, -1.0]),
        Vector::zeros(1),
        Vector::from_vec(vec![-1.0, 0.0]),
    )
    .unwrap()
}

fn simplex_pair() -> QpProblem {
    QpProblem::new(
        Matrix::identity(2, 2),
        Matrix::zeros(1, 1),
        Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        Vector::from_vec(vec![1.0]),
        Vector::zeros(2),
    )
    .unwrap()
}

fn freed(p: &QpProblem, basic: &[usize], l: usize) -> Partition {
    let mut part = Partition::from_basic(p, basic);
    part.remove_nonbasic(l);
    part.freed = Some(l);
    part
}

/// Singular bordered matrix with zero dual change, and singular basis
/// matrix with zero primal change, each checked by rank.
fn constructed_directions() -> Result<(), String> {
    let p = lp_pair();
    let part = freed(&p, &[1], 0);
    let f = factor_kb(&p, &part).map_err(|e| e.to_string())?;
    let d = solve_base_primal(&p, &part, &f, 0);
    let kl = kkt_matrix(&p, &[0, 1]);
    if d.dz_l != 0.0 || svd_rank(&kl) + 1 != kl.nrows() {
        return Err(format!("zero-dual case: dz_l = {}, bordered rank {} of {}", d.dz_l, svd_rank(&kl), kl.nrows()));
    }
    let r = check_direction_properties(&p, &part, &d);
    if !r.ok() {
        return Err(format!("zero-dual case: {:?}", r.violations));
    }
    let p = simplex_pair();
    let part = freed(&p, &[], 1);
    let d = solve_intermediate_primal(&p, &part, 1).map_err(|e| e.to_string())?;
    let kb = kkt_matrix(&p, &[]);
    if d.dx_l != 0.0 || svd_rank(&kb) + 1 != kb.nrows() {
        return Err(format!("zero-primal case: dx_l = {}, basic rank {} of {}", d.dx_l, svd_rank(&kb), kb.nrows()));
    }
    let r = check_direction_properties(&p, &part, &d);
    if !r.ok() {
        return Err(format!("zero-primal case: {:?}", r.violations));
    }
    Ok(())
}

fn criterion_5(c: &Corpus) -> Verdict {
    let checked: usize = c.reports.iter().map(|r| r.1.directions_checked).sum();
    let bad: Vec<&String> = c.reports.iter().flat_map(|r| r.1.direction_violations.iter()).collect();
    let constructed = constructed_directions();
    Verdict {
        id: 5,
        title: "direction properties",
        pass: bad.is_empty() && checked > 0 && constructed.is_ok(),
        detail: format!(
            "{checked} directions, {} violations{}; constructed singular cases: {}",
            bad.len(),
            first(bad),
            constructed.err().unwrap_or_else(|| "ok".into())
        ),
    }
}

fn criterion_6() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, want) in
        [("p1_negative_rhs", SolveStatus::PrimalInfeasible), ("linear_unbounded", SolveStatus::DualInfeasible)]
    {
        match solve_fixture(name, &SolverConfig::default()) {
            Ok(sol) => {
                let subs = sol.inner.total_subiterations();
                pass &= sol.status == want && subs <= 2;
                notes.push(format!("{name}: {} in {subs} subiteration(s)", sol.status));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict { id: 6, title: "infeasibility certificates", pass, detail: notes.join(", ") }
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_shiftqp")).args(args).output().map_err(|e| e.to_string())
}

fn read_single_row(dir: &Path) -> Result<RunRow, String> {
    let file = std::fs::File::open(dir.join("runlog.csv")).map_err(|e| e.to_string())?;
    let rows = read_runlog(file).map_err(|e| e.to_string())?;
    rows.into_iter().next().ok_or_else(|| "empty run log".into())
}

fn criterion_7() -> Verdict {
    let run = || -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let small_out = tmp.path().join("small");
        let small = fixture("one_var");
        let out = cli(&["run", small.to_str().unwrap(), "--out", small_out.to_str().unwrap()])?;
        let row = read_single_row(&small_out)?;
        if !out.status.success() || row.status != "optimal" || row.total_iterations() > 2 {
            return Err(format!("one_var: {} after {} iterations", row.status, row.total_iterations()));
        }
        let mut r = rng(500);
        let g = large_strictly_convex(&mut r, 500, 50);
        let path = tmp.path().join("large500.qpt");
        std::fs::write(&path, emit(&ProblemFile { name: Some("large500".into()), problem: g }))
            .map_err(|e| e.to_string())?;
        let big_out = tmp.path().join("big");
        let start = Instant::now();
        let out = cli(&["run", path.to_str().unwrap(), "--out", big_out.to_str().unwrap()])?;
        let secs = start.elapsed().as_secs_f64();
        let row = read_single_row(&big_out)?;
        if !out.status.success() || row.status != "optimal" || secs >= 10.0 {
            return Err(format!("500 variables: {} in {secs:.2} s", row.status));
        }
        Ok(format!(
            "1 variable: {} iteration(s); 500 variables, 50 rows: {} iterations in {secs:.2} s",
            read_single_row(&small_out)?.total_iterations(),
            row.total_iterations()
        ))
    };
    match run() {
        Ok(detail) => Verdict { id: 7, title: "problem size anchors through the CLI", pass: true, detail },
        Err(detail) => Verdict { id: 7, title: "problem size anchors through the CLI", pass: false, detail },
    }
}

const WELL_CONDITIONED: [&str; 8] =
    ["p1", "p2", "one_var", "convex5", "box_mixed", "three_var_blocked", "free_var", "dual_infeasible_start"];

fn criterion_8(c: &Corpus) -> Verdict {
    let mut failures = Vec::new();
    let mut optimal = 0;
    for (label, _, sol, p) in &c.reports {
        if let Some(sol) = sol {
            if sol.status == SolveStatus::Optimal {
                optimal += 1;
                if !check_optimality(p, &Shifts::zero(p.nvars()), &sol.iterate, 1e-6, 1e-6).optimal {
                    failures.push(format!("{label} fails the 1e-6 test"));
                }
            }
        }
    }
    for name in WELL_CONDITIONED {
        let tight = SolverConfig { eps_opt: 1e-10, eps_fea: 1e-10, ..Default::default() };
        match solve_fixture(name, &tight) {
            Ok(sol) => {
                let p = &sol.standardized.problem;
                let rep = check_optimality(p, &Shifts::zero(p.nvars()), &sol.inner.iterate, 1e-10, 1e-10);
                if sol.status != SolveStatus::Optimal || !rep.optimal {
                    failures.push(format!("{name} at 1e-10: {} {rep:?}", sol.status));
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    Verdict {
        id: 8,
        title: "termination tolerances",
        pass: failures.is_empty(),
        detail: format!(
            "{optimal} random optima pass at 1e-6, {} fixtures at 1e-10, {} failures{}",
            WELL_CONDITIONED.len(),
            failures.len(),
            first(&failures)
        ),
    }
}

fn log_row(name: &str, iters: usize) -> RunRow {
    RunRow {
        name: name.into(),
        n: 2,
        m: 1,
        status: "optimal".into(),
        objective: Some(0.0),
        strategy: "auto".into(),
        stage1_iters: iters,
        stage2_iters: 0,
        subiters: iters,
        millis: 0.0,
    }
}

fn criterion_9() -> Verdict {
    let run = || -> Result<String, String> {
        let a = [log_row("p1", 2), log_row("p2", 8)];
        let b = [log_row("p1", 4), log_row("p2", 4)];
        let data = profile(&a, &b, ("A", "B"))?;
        let steps: Vec<(String, f64, f64)> = data.steps.iter().map(|s| (s.solver.clone(), s.tau, s.fraction)).collect();
        let want = vec![
            ("A".to_string(), 1.0, 0.5),
            ("A".to_string(), 2.0, 1.0),
            ("B".to_string(), 1.0, 0.5),
            ("B".to_string(), 2.0, 1.0),
        ];
        let factors: Vec<f64> = data.factors.iter().map(|f| f.factor).collect();
        if steps != want || factors != [-1.0, 1.0] || data.factors.iter().any(|f| f.failure != Failure::None) {
            return Err(format!("steps {steps:?}, factors {factors:?}"));
        }
        // same example through the command line and the written files
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (la, lb) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
        write_runlog(std::fs::File::create(&la).map_err(|e| e.to_string())?, &a).map_err(|e| e.to_string())?;
        write_runlog(std::fs::File::create(&lb).map_err(|e| e.to_string())?, &b).map_err(|e| e.to_string())?;
        let out_dir = tmp.path().join("prof");
        let out = cli(&["profile", la.to_str().unwrap(), lb.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])?;
        let prof = std::fs::read_to_string(out_dir.join("profile.csv")).map_err(|e| e.to_string())?;
        let fac = std::fs::read_to_string(out_dir.join("factors.csv")).map_err(|e| e.to_string())?;
        let want_prof = "solver,tau,fraction\nA,1.0,0.5\nA,2.0,1.0\nB,1.0,0.5\nB,2.0,1.0\n";
        let want_fac = "problem,factor,failed\np1,-1.0,\np2,1.0,\n";
        if !out.status.success() || prof != want_prof || fac != want_fac {
            return Err(format!("files differ:\n{prof}\n{fac}"));
        }
        Ok("steps (1, 1/2), (2, 1) for both solvers; factors (-1, +1)".into())
    };
    match run() {
        Ok(detail) => Verdict { id: 9, title: "profile tooling", pass: true, detail },
        Err(detail) => Verdict { id: 9, title: "profile tooling", pass: false, detail },
    }
}

fn criterion_10() -> Verdict {
    let run = || -> Result<String, String> {
        let file = parse_problem(&fixture("free_var")).map_err(|e| e.to_string())?;
        let sol = solve_pdqp(&file.problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let p = &sol.standardized.problem;
        let oracle = enumerate_solve(p, &Shifts::zero(p.nvars())).map_err(|e| e.to_string())?;
        let registry = &sol.inner.registry;
        if registry.is_empty() {
            return Err("no temporary bound was registered".into());
        }
        if sol.status != SolveStatus::Optimal || rel(sol.inner.objective, oracle.objective) > 1e-9 {
            return Err(format!("{} {} against oracle {}", sol.status, sol.inner.objective, oracle.objective));
        }
        if registry.residual() > 1e-12 {
            return Err(format!("registered duals not zero: {:?}", registry.entries));
        }
        Ok(format!(
            "{} temporary bound(s), largest final dual {:e}, objective {} equals the oracle",
            registry.entries.len(),
            registry.residual(),
            sol.objective
        ))
    };
    match run() {
        Ok(detail) => Verdict { id: 10, title: "temporary bounds on free variables", pass: true, detail },
        Err(detail) => Verdict { id: 10, title: "temporary bounds on free variables", pass: false, detail },
    }
}

fn main() {
    let corpus = build_corpus();
    let verdicts = vec![
        criterion_1(&corpus),
        criterion_2(&corpus),
        criterion_3(&corpus),
        criterion_4(&corpus),
        criterion_5(&corpus),
        criterion_6(),
        criterion_7(),
        criterion_8(&corpus),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = 0;
    for v in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {}: {}", v.id, v.title, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
