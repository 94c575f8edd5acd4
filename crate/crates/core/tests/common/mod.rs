//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use shiftqp::driver::GeneralQp;
use shiftqp::model::{Matrix, QpProblem, Vector};

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: QpProblem,
    pub construction: Construction,
    pub label: String,
}

fn uniform(rng: &mut TestRng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

fn nonneg_sparse(rng: &mut TestRng, n: usize, zero_prob: f64) -> Vector {
    Vector::from_fn(n, |_, _| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random_range(0.1..2.0) })
}

/// `G·Gᵀ (+ δI)` with `G` of the given rank.
fn hessian(rng: &mut TestRng, n: usize, rank: usize, shift: f64) -> Matrix {
    let g = uniform(rng, n, rank, -1.0, 1.0);
    &g * g.transpose() + Matrix::identity(n, n) * shift
}

/// Random standard-form problem of the requested construction.
pub fn random_instance(rng: &mut TestRng, construction: Construction) -> Instance {
    loop {
        if let Some(inst) = try_instance(rng, construction) {
            return inst;
        }
    }
}

fn try_instance(rng: &mut TestRng, construction: Construction) -> Option<Instance> {
    let n = rng.random_range(2..=8usize);
    let reg = construction != Construction::Infeasible && rng.random::<f64>() < 0.3;
    let max_m = match construction {
        Construction::Unbounded => (n - 1).min(3),
        _ => n.min(3),
    };
    let m = rng.random_range(1..=max_m);
    let mu = if reg { 1e-2 } else { 0.0 };
    let pd = construction == Construction::Infeasible || rng.random::<f64>() < 0.5;
    let mut h = if pd {
        hessian(rng, n, n, 0.1)
    } else {
        let r = rng.random_range(0..n);
        hessian(rng, n, r, 0.0)
    };
    let mut a = uniform(rng, m, n, -1.0, 1.0);
    let mreg = Matrix::identity(m, m) * mu;
    let mut c;
    let b;
    match construction {
        Construction::Feasible => {
            let x0 = nonneg_sparse(rng, n, 0.4);
            let y0 = uniform(rng, m, 1, -1.0, 1.0).column(0).clone_owned();
            b = &a * &x0 + &mreg * &y0;
            let x1 = nonneg_sparse(rng, n, 0.4);
            let y1 = uniform(rng, m, 1, -1.0, 1.0).column(0).clone_owned();
            let z1 = nonneg_sparse(rng, n, 0.5);
            c = -(&h * &x1) + a.transpose() * &y1 + z1;
        }
        Construction::Infeasible => {
            for j in 0..n {
                a[(0, j)] = rng.random_range(0.1..1.0);
            }
            let mut bb = uniform(rng, m, 1, -1.0, 1.0).column(0).clone_owned();
            bb[0] = -rng.random_range(0.1..1.0);
            b = bb;
            c = uniform(rng, n, 1, -1.0, 1.0).column(0).clone_owned();
        }
        Construction::Unbounded => {
            let mut d = nonneg_sparse(rng, n, 0.3);
            if d.amax() == 0.0 {
                d[0] = 1.0;
            }
            let dd = d.dot(&d);
            let proj = Matrix::identity(n, n) - &d * d.transpose() / dd;
            a = &a * &proj;
            let rank = rng.random_range(0..n);
            let g = &proj * uniform(rng, n, rank, -1.0, 1.0);
            h = &g * g.transpose();
            let x0 = nonneg_sparse(rng, n, 0.4);
            b = &a * &x0;
            c = uniform(rng, n, 1, -1.0, 1.0).column(0).clone_owned();
            let t = rng.random_range(0.1..1.0);
            let cd = c.dot(&d);
            c -= &d * ((cd + t) / dd);
        }
    }
    // near-dependent rows make every basis ill-conditioned
    let sv = a.clone().svd(false, false).singular_values;
    if sv.min() < 1e-3 * sv.max() {
        return None;
    }
    let problem = QpProblem::new(h, mreg, a, b, c).ok()?;
    // a singular value far below the rest but above roundoff leaves the rank
    // of the full system ambiguous
    let all: Vec<usize> = (0..n).collect();
    let sv = shiftqp::kkt::kkt_matrix(&problem, &all).svd(false, false).singular_values;
    if sv.iter().any(|&v| v > 1e-12 * sv.max() && v < 1e-6 * sv.max()) {
        return None;
    }
    let label = format!("{construction:?} n={n} m={m} pd={pd} mu={mu}");
    Some(Instance { problem, construction, label })
}

/// Random general-form problem with mixed bounds. Either the Hessian is
/// positive definite or every variable is boxed, so the objective is bounded
/// on the feasible set.
pub fn random_general(rng: &mut TestRng) -> GeneralQp {
    loop {
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(1..=2usize);
        let pd = rng.random::<f64>() < 0.6;
        let rank = if pd { n } else { rng.random_range(0..n) };
        let h = hessian(rng, n, rank, if pd { 0.1 } else { 0.0 });
        let a = uniform(rng, m, n, -1.0, 1.0);
        let c = uniform(rng, n, 1, -1.0, 1.0).column(0).clone_owned();
        let mut lo = Vector::zeros(n + m);
        let mut hi = Vector::zeros(n + m);
        for j in 0..n + m {
            let boxed = !pd && j < n;
            let kind = if boxed { 2 } else { rng.random_range(0..5) };
            let base = rng.random_range(-1.0..1.0);
            let (l, u) = match kind {
                0 => (base, f64::INFINITY),
                1 => (f64::NEG_INFINITY, base),
                2 => (base, base + rng.random_range(0.1..2.0)),
                3 => (base, base),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            lo[j] = l;
            hi[j] = u;
        }
        if let Ok(g) = GeneralQp::new(h, a, c, lo, hi) {
            return g;
        }
    }
}

/// Strictly convex problem with `n` variables and `m` inequality rows whose
/// unconstrained minimizer is interior except for a handful of bounds.
pub fn large_strictly_convex(rng: &mut TestRng, n: usize, m: usize) -> GeneralQp {
    let g = uniform(rng, n, n, -1.0, 1.0) / (n as f64).sqrt();
    let h = &g * g.transpose() + Matrix::identity(n, n);
    let a = uniform(rng, m, n, -1.0, 1.0);
    // target point mostly inside the box
    let xt = Vector::from_fn(n, |i, _| if i % 50 == 0 { -0.5 } else { rng.random_range(0.5..1.5) });
    let c = -(&h * &xt);
    let ax = &a * &xt;
    let mut lo = Vector::zeros(n + m);
    let mut hi = Vector::from_element(n + m, f64::INFINITY);
    for i in 0..m {
        lo[n + i] = f64::NEG_INFINITY;
        hi[n + i] = ax[i] + if i % 10 == 0 { -0.1 } else { 1.0 };
    }
    GeneralQp::new(h, a, c, lo, hi).expect("valid construction")
}

use shiftqp::driver::{solve_pdqp_traced, solve_qp, QpSolution, SolveStatus, SolverConfig};
use shiftqp::model::{Partition, Shifts, Side};
use shiftqp::oracle::{check_direction_properties, enumerate_solve, OracleStatus};
use shiftqp::trace::{Method, VecSink};

/// Everything checked for one solved instance.
#[derive(Debug, Default, Clone)]
pub struct InstanceReport {
    pub status_match: bool,
    pub objective_match: bool,
    pub gap_violations: Vec<String>,
    pub monotone_violations: Vec<String>,
    pub identity_violations: Vec<String>,
    pub singular_boundaries: usize,
    pub direction_violations: Vec<String>,
    pub directions_checked: usize,
    pub steps: usize,
    pub stage_optima: usize,
    /// Solved through the general-form entry point.
    pub via_general: bool,
    pub error: Option<String>,
}

impl InstanceReport {
    /// Every check passed.
    pub fn clean(&self) -> bool {
        self.error.is_none()
            && self.status_match
            && self.objective_match
            && self.gap_violations.is_empty()
            && self.monotone_violations.is_empty()
            && self.identity_violations.is_empty()
            && self.singular_boundaries == 0
            && self.direction_violations.is_empty()
    }
}

/// The same problem in general form, when there is no regularization block:
/// `x ≥ 0` and every row an equality.
pub fn as_general(p: &QpProblem) -> Option<GeneralQp> {
    if p.regularization().amax() != 0.0 {
        return None;
    }
    let n = p.nvars();
    let m = p.ncons();
    let lower = Vector::from_iterator(n + m, p.lower().iter().chain(p.rhs().iter()).copied());
    let upper = Vector::from_iterator(n + m, p.upper().iter().chain(p.rhs().iter()).copied());
    GeneralQp::new(p.hessian().clone(), p.constraints().clone(), p.cost().clone(), lower, upper).ok()
}

pub fn oracle_status_name(s: OracleStatus) -> SolveStatus {
    match s {
        OracleStatus::Optimal => SolveStatus::Optimal,
        OracleStatus::PrimalInfeasible => SolveStatus::PrimalInfeasible,
        OracleStatus::DualInfeasible => SolveStatus::DualInfeasible,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Solve with the driver and the oracle and check every trace record.
pub fn check_instance(p: &QpProblem, config: &SolverConfig) -> (InstanceReport, Option<QpSolution>) {
    let mut rep = InstanceReport::default();
    let oracle = match enumerate_solve(p, &Shifts::zero(p.nvars())) {
        Ok(o) => o,
        Err(e) => {
            rep.error = Some(format!("oracle: {e}"));
            return (rep, None);
        }
    };
    let mut sink = VecSink::default();
    let solved = match as_general(p) {
        Some(g) => {
            rep.via_general = true;
            solve_pdqp_traced(&g, config, &mut sink).map(|s| {
                if s.standardized.problem != *p {
                    rep.error = Some("standard form differs from the generated problem".into());
                }
                s.inner
            })
        }
        None => solve_qp(p, config, &mut sink),
    };
    let sol = match solved {
        Ok(s) => s,
        Err(e) => {
            rep.error = Some(format!("solver: {e}"));
            return (rep, None);
        }
    };
    if rep.error.is_some() {
        return (rep, Some(sol));
    }
    rep.status_match = sol.status == oracle_status_name(oracle.status);
    rep.objective_match = sol.status != SolveStatus::Optimal || rel(sol.objective, oracle.objective) <= 1e-7;
    for st in sink.stages() {
        if st.status == "optimal" {
            rep.stage_optima += 1;
            let gap = st.primal_objective - st.dual_objective - st.gap_target;
            if gap.abs() > 1e-9 * (1.0 + st.primal_objective.abs()) {
                rep.gap_violations.push(format!("stage {} gap error {gap:e}", st.stage));
            }
        }
    }
    rep.singular_boundaries = sink.boundaries().filter(|b| !b.factored).count();
    for s in sink.steps() {
        rep.steps += 1;
        let df = s.objective_after - s.objective_before;
        let quad = 0.5 * s.dx_l * s.dz_l * s.alpha * s.alpha;
        let (pred, monotone) = match s.method {
            Method::Primal => (s.dx_l * s.violation * s.alpha + quad, df <= 1e-9 * (1.0 + s.objective_before.abs())),
            Method::Dual => (-s.dz_l * s.violation * s.alpha - quad, df >= -1e-9 * (1.0 + s.objective_before.abs())),
        };
        let tag = || format!("stage {} it {} sub {} {:?}", s.stage, s.iteration, s.subiteration, s.method);
        if !monotone {
            rep.monotone_violations.push(format!("{}: change {df:e}", tag()));
        }
        let scale = 1.0 + s.objective_before.abs().max(s.objective_after.abs());
        if (df - pred).abs() > 1e-9 * scale {
            rep.identity_violations.push(format!("{}: change {df:e} predicted {pred:e}", tag()));
        }
        let mut part = Partition {
            basic: s.basic.clone(),
            nonbasic: s.nonbasic.clone(),
            freed: Some(s.freed),
            side: vec![Side::Lower; p.nvars()],
        };
        part.basic.retain(|&j| j != s.freed);
        let r = check_direction_properties(p, &part, &s.direction);
        rep.directions_checked += 1;
        if !r.ok() {
            rep.direction_violations.push(format!("{}: {:?}", tag(), r.violations));
        }
    }
    (rep, Some(sol))
}
