//! Two-stage solve: standardize, pick a nonsingular initial basis, shift the
//! bounds so the basis point is optimal for a relaxed pair, then remove the
//! shifts with one primal and one dual solve (in either order).

use crate::dual::{solve_dual_stage, DualStatus};
use crate::engine::{Limits, SolveError};
use crate::kkt::{factor_kb, find_soc_basis, refresh_iterate};
use crate::model::{
    check_optimality, dual_objective, primal_objective, shift_gap, Iterate, Matrix, ModelError, Partition, QpProblem,
    Shifts, Side, Vector,
};
use crate::primal::{solve_primal_stage, PrimalStatus};
use crate::trace::{Method, NullSink, StageRecord, TraceEvent, TraceSink};
use std::fmt;
use std::str::FromStr;

/// Problem in the general form
///
/// ```text
/// minimize ½xᵀHx + cᵀx   subject to  lower ≤ (x, Ax) ≤ upper
/// ```
///
/// `lower` and `upper` have one entry per variable followed by one per
/// constraint row; infinite entries mean no bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralQp {
    pub hessian: Matrix,
    pub constraints: Matrix,
    pub cost: Vector,
    pub lower: Vector,
    pub upper: Vector,
}

impl GeneralQp {
    pub fn new(
        hessian: Matrix,
        constraints: Matrix,
        cost: Vector,
        lower: Vector,
        upper: Vector,
    ) -> Result<Self, ModelError> {
        let n = hessian.nrows();
        let m = constraints.nrows();
        if hessian.ncols() != n || constraints.ncols() != n || cost.len() != n {
            return Err(ModelError::Dimension("hessian, constraints and cost disagree on the variable count".into()));
        }
        if lower.len() != n + m || upper.len() != n + m {
            return Err(ModelError::Dimension("bounds need one entry per variable and per row".into()));
        }
        for j in 0..n + m {
            let (l, u) = (lower[j], upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(ModelError::InconsistentBounds { index: j, lower: l, upper: u });
            }
        }
        Ok(Self { hessian, constraints, cost, lower, upper })
    }

    pub fn nvars(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn ncons(&self) -> usize {
        self.constraints.nrows()
    }

    /// `½xᵀHx + cᵀx`.
    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.cost.dot(x)
    }
}

/// Standard-form problem built from a [`GeneralQp`]. Each inequality row
/// gets a slack, `Ax − s = 0`, with the row bounds moved onto `s`; an
/// equality row is kept as `Ax = b` when the rows stay independent.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub problem: QpProblem,
    pub nvars: usize,
    pub ncons: usize,
    /// Standard-form index of each row's slack.
    pub slack: Vec<Option<usize>>,
}

impl Standardized {
    /// Original `(x, y, z)` from a standard-form iterate.
    pub fn recover(&self, it: &Iterate) -> (Vector, Vector, Vector) {
        let n = self.nvars;
        (it.x.rows(0, n).clone_owned(), it.y.clone(), it.z.rows(0, n).clone_owned())
    }
}

fn build_standard(g: &GeneralQp, keep_equalities: bool) -> Result<Standardized, ModelError> {
    let n = g.nvars();
    let m = g.ncons();
    let mut slack = vec![None; m];
    let mut b = Vector::zeros(m);
    let mut next = n;
    for i in 0..m {
        let (lo, hi) = (g.lower[n + i], g.upper[n + i]);
        if keep_equalities && lo == hi {
            b[i] = lo;
        } else {
            slack[i] = Some(next);
            next += 1;
        }
    }
    let total = next;
    let mut h = Matrix::zeros(total, total);
    h.view_mut((0, 0), (n, n)).copy_from(&g.hessian);
    let mut a = Matrix::zeros(m, total);
    a.view_mut((0, 0), (m, n)).copy_from(&g.constraints);
    let mut c = Vector::zeros(total);
    c.rows_mut(0, n).copy_from(&g.cost);
    let mut lower = Vector::zeros(total);
    let mut upper = Vector::zeros(total);
    lower.rows_mut(0, n).copy_from(&g.lower.rows(0, n));
    upper.rows_mut(0, n).copy_from(&g.upper.rows(0, n));
    for (i, s) in slack.iter().enumerate() {
        if let Some(j) = *s {
            a[(i, j)] = -1.0;
            lower[j] = g.lower[n + i];
            upper[j] = g.upper[n + i];
        }
    }
    let problem = QpProblem::with_bounds(h, Matrix::zeros(m, m), a, b, c, lower, upper)?;
    Ok(Standardized { problem, nvars: n, ncons: m, slack })
}

pub fn standardize(g: &GeneralQp) -> Result<Standardized, ModelError> {
    match build_standard(g, true) {
        Err(ModelError::RankDeficient { .. }) => build_standard(g, false),
        other => other,
    }
}

/// A free variable held at `value` while nonbasic.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporaryBound {
    pub index: usize,
    pub value: f64,
    /// Dual at the initial basis point.
    pub initial_dual: f64,
    /// Dual at the end of the solve.
    pub final_dual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemporaryBoundRegistry {
    pub entries: Vec<TemporaryBound>,
}

impl TemporaryBoundRegistry {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest final dual magnitude.
    pub fn residual(&self) -> f64 {
        self.entries.iter().map(|e| e.final_dual.abs()).fold(0.0, f64::max)
    }

    fn record_final(&mut self, it: &Iterate) {
        for e in &mut self.entries {
            e.final_dual = it.z[e.index];
        }
    }
}

/// Apply the temporary-bound rule to the shifts of a stage: a primal stage
/// sees the recorded duals as violations to be driven to zero, a dual stage
/// has them shifted away so they never move.
pub fn temporary_bound_pass(registry: &TemporaryBoundRegistry, method: Method, s: &mut Shifts) {
    for e in &registry.entries {
        s.r[e.index] = match method {
            Method::Primal => 0.0,
            Method::Dual => -e.initial_dual,
        };
    }
}

/// Shifts that make the basis point of `part` optimal for the shifted pair,
/// together with that point. Nonbasic variables sit at their bound (free
/// ones at zero, registered as temporary bounds); variables whose two bounds
/// coincide take the side matching their dual.
pub fn init_shifts(
    p: &QpProblem,
    part: &mut Partition,
) -> Result<(Shifts, Iterate, TemporaryBoundRegistry), SolveError> {
    let n = p.nvars();
    let zero = Shifts::zero(n);
    let mut it = Iterate::zeros(n, p.ncons());
    for &j in &part.nonbasic {
        it.x[j] = p.bound_value(&zero, j, part.side[j]);
    }
    let f = factor_kb(p, part)?;
    refresh_iterate(p, &f, &mut it);
    let mut s = Shifts::zero(n);
    for &j in &part.basic {
        let x = it.x[j];
        if p.lower()[j].is_finite() {
            s.q[j] = (p.lower()[j] - x).max(0.0);
        }
        if p.upper()[j].is_finite() {
            s.q_upper[j] = (x - p.upper()[j]).max(0.0);
        }
    }
    let mut registry = TemporaryBoundRegistry::default();
    for &j in &part.nonbasic {
        let z = it.z[j];
        if p.pinched(&zero, j) {
            part.side[j] = if z >= 0.0 { Side::Lower } else { Side::Upper };
            continue;
        }
        s.r[j] = match part.side[j] {
            Side::Lower => (-z).max(0.0),
            Side::Upper => -z.max(0.0),
            Side::Temporary => {
                registry.entries.push(TemporaryBound { index: j, value: 0.0, initial_dual: z, final_dual: z });
                -z
            }
        };
    }
    Ok((s, it, registry))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Dual-first when the initial point is dual feasible, else primal-first.
    Auto,
    PrimalFirst,
    DualFirst,
    /// Primal method alone; the initial point must be primal feasible.
    PrimalOnly,
    /// Dual method alone; the initial point must be dual feasible.
    DualOnly,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Auto => "auto",
            Strategy::PrimalFirst => "primal-first",
            Strategy::DualFirst => "dual-first",
            Strategy::PrimalOnly => "primal-only",
            Strategy::DualOnly => "dual-only",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "auto" => Strategy::Auto,
            "primal-first" => Strategy::PrimalFirst,
            "dual-first" => Strategy::DualFirst,
            "primal-only" => Strategy::PrimalOnly,
            "dual-only" => Strategy::DualOnly,
            _ => return Err(format!("unknown strategy '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps_opt: f64,
    pub eps_fea: f64,
    /// Budget on outer iterations across both stages.
    pub max_iter: usize,
    pub strategy: Strategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { eps_opt: 1e-6, eps_fea: 1e-6, max_iter: 10_000, strategy: Strategy::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal-infeasible",
            SolveStatus::DualInfeasible => "dual-infeasible",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolveStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "primal-infeasible" => SolveStatus::PrimalInfeasible,
            "dual-infeasible" => SolveStatus::DualInfeasible,
            "iteration-limit" => SolveStatus::IterationLimit,
            _ => return Err(format!("unknown status '{s}'")),
        })
    }
}

/// Result of [`solve_qp`], in the coordinates of the problem solved.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: SolveStatus,
    pub iterate: Iterate,
    pub partition: Partition,
    /// Strategy actually run (never `Auto`).
    pub strategy: Strategy,
    pub initial_shifts: Shifts,
    pub stages: Vec<StageRecord>,
    pub registry: TemporaryBoundRegistry,
    /// `½xᵀHx + ½yᵀMy + cᵀx` at the final iterate.
    pub objective: f64,
}

impl QpSolution {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn total_subiterations(&self) -> usize {
        self.stages.iter().map(|s| s.subiterations).sum()
    }

    /// Outer iterations of stage `k` (1 or 2); 0 when it did not run.
    pub fn stage_iterations(&self, k: usize) -> usize {
        self.stages.iter().find(|s| s.stage == k).map_or(0, |s| s.iterations)
    }
}

/// Result of [`solve_pdqp`] in the coordinates of the general problem.
#[derive(Debug, Clone)]
pub struct PdqpSolution {
    pub status: SolveStatus,
    pub x: Vector,
    /// Multipliers of the constraint rows.
    pub y: Vector,
    /// Multipliers of the variable bounds.
    pub z: Vector,
    pub objective: f64,
    pub standardized: Standardized,
    pub inner: QpSolution,
}

fn auto_pick(
    p: &QpProblem,
    it: &Iterate,
    part: &Partition,
    registry: &TemporaryBoundRegistry,
    eps_fea: f64,
) -> Strategy {
    let tol = eps_fea * it.y.amax().max(1.0);
    let zero = Shifts::zero(p.nvars());
    let dual_feasible = part.nonbasic.iter().all(|&j| match part.side[j] {
        Side::Temporary => true,
        side => p.pinched(&zero, j) || side.sign() * it.z[j] >= -tol,
    });
    let temporaries_clear = registry.entries.iter().all(|e| e.initial_dual.abs() <= tol);
    if dual_feasible && temporaries_clear {
        Strategy::DualFirst
    } else {
        Strategy::PrimalFirst
    }
}

struct StageResult {
    status: SolveStatus,
    done: bool,
    iterate: Iterate,
    partition: Partition,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    p: &QpProblem,
    s: &Shifts,
    method: Method,
    start: (Iterate, Partition),
    limits: &Limits,
    sink: &mut dyn TraceSink,
    stage: usize,
    stages: &mut Vec<StageRecord>,
) -> Result<StageResult, SolveError> {
    let (status, done, it, part, iterations, subiterations) = match method {
        Method::Primal => {
            let out = solve_primal_stage(p, s, start, limits, sink, stage)?;
            let (status, done) = match out.status {
                PrimalStatus::Optimal => (SolveStatus::Optimal, false),
                PrimalStatus::DualInfeasible => (SolveStatus::DualInfeasible, true),
                PrimalStatus::IterationLimit => (SolveStatus::IterationLimit, true),
            };
            (status, done, out.iterate, out.partition, out.iterations, out.subiterations)
        }
        Method::Dual => {
            let out = solve_dual_stage(p, s, start, limits, sink, stage)?;
            let (status, done) = match out.status {
                DualStatus::Optimal => (SolveStatus::Optimal, false),
                DualStatus::PrimalInfeasible => (SolveStatus::PrimalInfeasible, true),
                DualStatus::IterationLimit => (SolveStatus::IterationLimit, true),
            };
            (status, done, out.iterate, out.partition, out.iterations, out.subiterations)
        }
    };
    let rec = StageRecord {
        stage,
        method,
        status: status.name().to_string(),
        iterations,
        subiterations,
        shifts: s.clone(),
        primal_objective: primal_objective(p, s, &it),
        dual_objective: dual_objective(p, s, &it),
        gap_target: shift_gap(p, s),
        optimal: status == SolveStatus::Optimal && check_optimality(p, s, &it, limits.eps_fea, limits.eps_opt).optimal,
    };
    if sink.enabled() {
        sink.event(TraceEvent::Stage(rec.clone()));
    }
    stages.push(rec);
    Ok(StageResult { status, done, iterate: it, partition: part })
}

/// Check that a point satisfies the relaxed start conditions of `method` for
/// shifts `s`.
fn check_start(
    p: &QpProblem,
    s: &Shifts,
    it: &Iterate,
    part: &Partition,
    method: Method,
    limits: &Limits,
) -> Result<(), SolveError> {
    let slack = 10.0 * limits.eps_fea.max(limits.eps_opt * it.y.amax().max(1.0));
    match method {
        Method::Primal => {
            for &j in &part.basic {
                let x = it.x[j];
                if x < p.lower_shifted(s, j) - slack || x > p.upper_shifted(s, j) + slack {
                    return Err(SolveError::InvalidStart(format!("basic variable {j} violates its bound")));
                }
            }
        }
        Method::Dual => {
            for &j in &part.nonbasic {
                let side = part.side[j];
                if side == Side::Temporary || p.pinched(s, j) {
                    continue;
                }
                if side.sign() * (it.z[j] + s.r[j]) < -slack {
                    return Err(SolveError::InvalidStart(format!("nonbasic dual {j} has the wrong sign")));
                }
            }
        }
    }
    Ok(())
}

/// Solve a standard-form problem with the configured strategy.
pub fn solve_qp(p: &QpProblem, config: &SolverConfig, sink: &mut dyn TraceSink) -> Result<QpSolution, SolveError> {
    let n = p.nvars();
    let mut part = find_soc_basis(p).partition;
    let (s0, it0, mut registry) = init_shifts(p, &mut part)?;
    let strategy = match config.strategy {
        Strategy::Auto => auto_pick(p, &it0, &part, &registry, config.eps_fea),
        other => other,
    };
    let zero = Shifts::zero(n);
    let mut s_primal = Shifts { q: s0.q.clone(), q_upper: s0.q_upper.clone(), r: Vector::zeros(n) };
    temporary_bound_pass(&registry, Method::Primal, &mut s_primal);
    let mut s_dual = Shifts { q: Vector::zeros(n), q_upper: Vector::zeros(n), r: s0.r.clone() };
    temporary_bound_pass(&registry, Method::Dual, &mut s_dual);
    let plan: Vec<(Method, Shifts)> = match strategy {
        Strategy::PrimalFirst | Strategy::Auto => vec![(Method::Primal, s_primal), (Method::Dual, zero.clone())],
        Strategy::DualFirst => vec![(Method::Dual, s_dual), (Method::Primal, zero.clone())],
        Strategy::PrimalOnly => {
            if s0.q.iter().chain(s0.q_upper.iter()).any(|&v| v > 0.0) {
                return Err(SolveError::InvalidStart("initial point is not primal feasible".into()));
            }
            vec![(Method::Primal, zero.clone())]
        }
        Strategy::DualOnly => {
            let tol = config.eps_opt * it0.y.amax().max(1.0);
            if s0.r.iter().any(|&v| v.abs() > tol) {
                return Err(SolveError::InvalidStart("initial point is not dual feasible".into()));
            }
            vec![(Method::Dual, zero.clone())]
        }
    };
    let mut stages = Vec::new();
    let mut it = it0;
    let mut status = SolveStatus::Optimal;
    let mut used = 0;
    for (k, (method, s)) in plan.iter().enumerate() {
        let limits = Limits {
            max_iter: config.max_iter.saturating_sub(used),
            eps_fea: config.eps_fea,
            eps_opt: config.eps_opt,
            ..Limits::default()
        };
        check_start(p, s, &it, &part, *method, &limits)?;
        let res = run_stage(p, s, *method, (it, part), &limits, sink, k + 1, &mut stages)?;
        used += stages.last().map_or(0, |r| r.iterations);
        it = res.iterate;
        part = res.partition;
        status = res.status;
        if res.done {
            break;
        }
    }
    registry.record_final(&it);
    let objective = primal_objective(p, &zero, &it);
    Ok(QpSolution { status, iterate: it, partition: part, strategy, initial_shifts: s0, stages, registry, objective })
}

/// Standardize and solve a general problem.
pub fn solve_pdqp(g: &GeneralQp, config: &SolverConfig) -> Result<PdqpSolution, SolveError> {
    solve_pdqp_traced(g, config, &mut NullSink)
}

pub fn solve_pdqp_traced(
    g: &GeneralQp,
    config: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<PdqpSolution, SolveError> {
    let standardized = standardize(g)?;
    let inner = solve_qp(&standardized.problem, config, sink)?;
    let (x, y, z) = standardized.recover(&inner.iterate);
    let objective = g.objective(&x);
    Ok(PdqpSolution { status: inner.status, x, y, z, objective, standardized, inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::VecSink;

    fn std_problem(c: [f64; 2], b: f64) -> QpProblem {
        QpProblem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(1, 1),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Vector::from_vec(vec![b]),
            Vector::from_row_slice(&c),
        )
        .unwrap()
    }

    #[test]
    fn shifts_for_single_basic_variable() {
        let p = std_problem([2.0, 0.0], 1.0);
        let mut part = Partition::from_basic(&p, &[0]);
        let (s, it, reg) = init_shifts(&p, &mut part).unwrap();
        assert_eq!(s.q.as_slice(), &[0.0, 0.0]);
        assert_eq!(s.r.as_slice(), &[0.0, 3.0]);
        assert!((it.x[0] - 1.0).abs() < 1e-15 && (it.y[0] - 3.0).abs() < 1e-15);
        assert!(reg.is_empty());
        assert!(check_optimality(&p, &s, &it, 1e-12, 1e-12).optimal);
    }

    #[test]
    fn shifts_vanish_at_optimal_basis() {
        let p = std_problem([0.0, 0.0], 1.0);
        let mut part = Partition::from_basic(&p, &[0, 1]);
        let (s, it, _) = init_shifts(&p, &mut part).unwrap();
        assert!(s.is_zero());
        assert!((it.x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn second_fixture_end_to_end() {
        let p = std_problem([2.0, 0.0], 1.0);
        let mut sink = VecSink::default();
        let sol = solve_qp(&p, &SolverConfig::default(), &mut sink).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.iterate.x[1] - 1.0).abs() < 1e-12);
        assert!(sink.stages().all(|s| s.optimal));
    }

    #[test]
    fn infeasible_rhs_detected() {
        let p = std_problem([0.0, 0.0], -1.0);
        let sol = solve_qp(&p, &SolverConfig::default(), &mut NullSink).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn standardized_dimensions() {
        let g = GeneralQp::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Vector::zeros(2),
            Vector::from_vec(vec![0.0, 0.0, 1.0]),
            Vector::from_vec(vec![f64::INFINITY, f64::INFINITY, 1.0]),
        )
        .unwrap();
        let st = standardize(&g).unwrap();
        assert_eq!(st.problem.nvars(), 2);
        assert_eq!(st.problem.ncons(), 1);
        assert_eq!(st.problem.rhs()[0], 1.0);
        assert_eq!(st.slack, vec![None]);
        let ranged = GeneralQp { upper: Vector::from_vec(vec![f64::INFINITY, f64::INFINITY, 2.0]), ..g.clone() };
        let st = standardize(&ranged).unwrap();
        assert_eq!(st.problem.nvars(), 3);
        assert_eq!(st.problem.constraints().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, -1.0]);
        let dependent = GeneralQp::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            Vector::zeros(2),
            Vector::from_vec(vec![0.0, 0.0, 1.0, 2.0]),
            Vector::from_vec(vec![f64::INFINITY, f64::INFINITY, 1.0, 2.0]),
        )
        .unwrap();
        assert_eq!(standardize(&dependent).unwrap().slack, vec![Some(2), Some(3)]);
        let sol = solve_pdqp(&g, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-12 && (sol.objective - 0.25).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_bounds_rejected() {
        let g = GeneralQp::new(
            Matrix::identity(1, 1),
            Matrix::zeros(0, 1),
            Vector::zeros(1),
            Vector::from_vec(vec![1.0]),
            Vector::from_vec(vec![0.0]),
        );
        assert!(matches!(g, Err(ModelError::InconsistentBounds { .. })));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::Auto, Strategy::PrimalFirst, Strategy::DualFirst, Strategy::PrimalOnly, Strategy::DualOnly]
        {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("simplex".parse::<Strategy>().is_err());
    }
}
