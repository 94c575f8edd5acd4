//! Problem, partition and iterate data, objective evaluation and the joint
//! optimality test for a shifted primal-dual pair.
//!
//! The canonical problem is
//!
//! ```text
//! minimize    ½xᵀHx + ½yᵀMy + cᵀx     subject to  Ax + My = b,  x ≥ 0
//! ```
//!
//! and its shifted relatives add `rᵀx` to the objective and relax the bound
//! to `x ≥ −q`. Variables may also carry general bounds `lower ≤ x ≤ upper`
//! (either side possibly infinite); the zero-lower-bound case is the default.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative eigenvalue slack accepted by the semidefiniteness check.
pub const PSD_TOL: f64 = 1e-10;
/// Relative residual allowed for the equality parts of an iterate.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("{which} is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NotPsd { which: &'static str, pivot: f64, index: usize },
    #[error("constraint block [A M] has rank {rank}, expected {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("inconsistent bounds for variable {index}: lower {lower} > upper {upper}")]
    InconsistentBounds { index: usize, lower: f64, upper: f64 },
}

/// Immutable problem data.
///
/// Only the lower triangles of the Hessian blocks are read; the stored
/// matrices are their symmetric completions.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    hessian: Matrix,
    regularization: Matrix,
    constraints: Matrix,
    rhs: Vector,
    cost: Vector,
    lower: Vector,
    upper: Vector,
}

fn symmetrize_lower(mut a: Matrix) -> Matrix {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            a[(j, i)] = a[(i, j)];
        }
    }
    a
}

fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Pivoted Cholesky test. Accepts the matrix when every accepted pivot is
/// positive and the trailing block left after pivots drop below
/// `PSD_TOL·max_diag` has no eigenvalue below `−PSD_TOL·max_diag`.
pub fn check_psd(which: &'static str, a: &Matrix) -> Result<(), ModelError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(());
    }
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = PSD_TOL * max_diag;
    let mut w = a.clone();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut best, mut best_val) = (k, w[(k, k)]);
        for i in (k + 1)..n {
            if w[(i, i)] > best_val {
                best = i;
                best_val = w[(i, i)];
            }
        }
        if best_val <= tol {
            let rest = w.view((k, k), (n - k, n - k)).clone_owned();
            let min_eig = rest.symmetric_eigenvalues().min();
            if min_eig < -tol {
                return Err(ModelError::NotPsd { which, pivot: min_eig, index: order[k] });
            }
            return Ok(());
        }
        if best != k {
            w.swap_rows(k, best);
            w.swap_columns(k, best);
            order.swap(k, best);
        }
        let d = w[(k, k)];
        for j in (k + 1)..n {
            let f = w[(j, k)] / d;
            for i in (k + 1)..n {
                let v = w[(i, k)] * f;
                w[(i, j)] -= v;
            }
        }
    }
    Ok(())
}

/// Numerical rank of `[A M]` from a column-pivoted QR of its transpose.
pub fn constraint_rank(constraints: &Matrix, regularization: &Matrix) -> usize {
    let m = constraints.nrows();
    if m == 0 {
        return 0;
    }
    let n = constraints.ncols();
    let mut t = Matrix::zeros(n + m, m);
    t.view_mut((0, 0), (n, m)).copy_from(&constraints.transpose());
    t.view_mut((n, 0), (m, m)).copy_from(&regularization.transpose());
    let r = t.col_piv_qr().r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return 0;
    }
    let tol = 1e-10 * lead.max(1e-300);
    (0..m.min(r.nrows())).filter(|&k| r[(k, k)].abs() > tol).count()
}

impl QpProblem {
    /// Problem with the default bound `x ≥ 0`.
    pub fn new(
        hessian: Matrix,
        regularization: Matrix,
        constraints: Matrix,
        rhs: Vector,
        cost: Vector,
    ) -> Result<Self, ModelError> {
        let n = hessian.nrows();
        Self::with_bounds(
            hessian,
            regularization,
            constraints,
            rhs,
            cost,
            Vector::zeros(n),
            Vector::from_element(n, f64::INFINITY),
        )
    }

    pub fn with_bounds(
        hessian: Matrix,
        regularization: Matrix,
        constraints: Matrix,
        rhs: Vector,
        cost: Vector,
        lower: Vector,
        upper: Vector,
    ) -> Result<Self, ModelError> {
        let n = hessian.nrows();
        let m = constraints.nrows();
        let dim = |what: &str| Err(ModelError::Dimension(what.to_string()));
        if hessian.ncols() != n {
            return dim("hessian must be square");
        }
        if constraints.ncols() != n {
            return dim("constraint matrix column count differs from variable count");
        }
        if regularization.nrows() != m || regularization.ncols() != m {
            return dim("regularization block must be m×m");
        }
        if rhs.len() != m {
            return dim("right-hand side length differs from constraint count");
        }
        if cost.len() != n || lower.len() != n || upper.len() != n {
            return dim("cost and bound vectors must have one entry per variable");
        }
        if !all_finite(&hessian) {
            return Err(ModelError::NonFinite("hessian"));
        }
        if !all_finite(&regularization) {
            return Err(ModelError::NonFinite("regularization"));
        }
        if !all_finite(&constraints) {
            return Err(ModelError::NonFinite("constraints"));
        }
        if !rhs.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite("rhs"));
        }
        if !cost.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite("cost"));
        }
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(ModelError::InconsistentBounds { index: j, lower: l, upper: u });
            }
        }
        let hessian = symmetrize_lower(hessian);
        let regularization = symmetrize_lower(regularization);
        check_psd("hessian", &hessian)?;
        check_psd("regularization", &regularization)?;
        let rank = constraint_rank(&constraints, &regularization);
        if rank < m {
            return Err(ModelError::RankDeficient { rank, rows: m });
        }
        Ok(Self { hessian, regularization, constraints, rhs, cost, lower, upper })
    }

    pub fn nvars(&self) -> usize {
        self.hessian.nrows()
    }
    pub fn ncons(&self) -> usize {
        self.constraints.nrows()
    }
    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }
    pub fn regularization(&self) -> &Matrix {
        &self.regularization
    }
    pub fn constraints(&self) -> &Matrix {
        &self.constraints
    }
    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }
    pub fn cost(&self) -> &Vector {
        &self.cost
    }
    pub fn lower(&self) -> &Vector {
        &self.lower
    }
    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn bound_kind(&self, j: usize) -> BoundKind {
        match (self.lower[j].is_finite(), self.upper[j].is_finite()) {
            (true, true) => BoundKind::Both,
            (true, false) => BoundKind::Lower,
            (false, true) => BoundKind::Upper,
            (false, false) => BoundKind::Free,
        }
    }

    pub fn is_free(&self, j: usize) -> bool {
        self.bound_kind(j) == BoundKind::Free
    }

    /// Placement used for a variable first put in the nonbasic set.
    pub fn default_side(&self, j: usize) -> Side {
        match self.bound_kind(j) {
            BoundKind::Both | BoundKind::Lower => Side::Lower,
            BoundKind::Upper => Side::Upper,
            BoundKind::Free => Side::Temporary,
        }
    }

    /// Shifted lower bound `lower − q`.
    pub fn lower_shifted(&self, s: &Shifts, j: usize) -> f64 {
        if self.lower[j].is_finite() {
            self.lower[j] - s.q[j]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Shifted upper bound `upper + q_upper`.
    pub fn upper_shifted(&self, s: &Shifts, j: usize) -> f64 {
        if self.upper[j].is_finite() {
            self.upper[j] + s.q_upper[j]
        } else {
            f64::INFINITY
        }
    }

    /// Value a nonbasic variable is pinned to.
    pub fn bound_value(&self, s: &Shifts, j: usize, side: Side) -> f64 {
        match side {
            Side::Lower => self.lower_shifted(s, j),
            Side::Upper => self.upper_shifted(s, j),
            Side::Temporary => 0.0,
        }
    }

    /// Both shifted bounds finite and equal.
    pub fn pinched(&self, s: &Shifts, j: usize) -> bool {
        let (l, u) = (self.lower_shifted(s, j), self.upper_shifted(s, j));
        l.is_finite() && l == u
    }

    /// Infinity norm of the right-hand side and cost combined, used to scale
    /// residual tolerances.
    pub fn data_scale(&self) -> f64 {
        1.0 + self.cost.amax() + self.rhs.amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    Upper,
    Both,
    Free,
}

/// Where a nonbasic variable sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
    /// A free variable held at zero until it can enter the basic set.
    Temporary,
}

impl Side {
    /// +1 when the variable's dual must be nonnegative, −1 when nonpositive.
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => -1.0,
            _ => 1.0,
        }
    }
}

/// Primal and dual bound shifts. `q` relaxes lower bounds, `q_upper` relaxes
/// upper bounds and `r` is the net dual shift entering the objective as
/// `rᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shifts {
    pub q: Vector,
    pub q_upper: Vector,
    pub r: Vector,
}

impl Shifts {
    pub fn zero(n: usize) -> Self {
        Self { q: Vector::zeros(n), q_upper: Vector::zeros(n), r: Vector::zeros(n) }
    }

    pub fn new(q: Vector, r: Vector) -> Self {
        let n = q.len();
        Self { q, q_upper: Vector::zeros(n), r }
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().chain(self.q_upper.iter()).chain(self.r.iter()).all(|&v| v == 0.0)
    }
}

/// Basic / nonbasic split with an optional index in transit.
///
/// `basic` and `nonbasic` are kept sorted. `side` records the placement of
/// every nonbasic variable (and the target placement of the freed index in
/// the dual method); entries for basic variables are not meaningful.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub basic: Vec<usize>,
    pub nonbasic: Vec<usize>,
    pub freed: Option<usize>,
    pub side: Vec<Side>,
}

fn sorted_insert(v: &mut Vec<usize>, j: usize) {
    if let Err(pos) = v.binary_search(&j) {
        v.insert(pos, j);
    }
}

fn sorted_remove(v: &mut Vec<usize>, j: usize) -> bool {
    match v.binary_search(&j) {
        Ok(pos) => {
            v.remove(pos);
            true
        }
        Err(_) => false,
    }
}

impl Partition {
    /// Partition with the given basic set; every other index is nonbasic at
    /// its default side.
    pub fn from_basic(p: &QpProblem, basic: &[usize]) -> Self {
        let n = p.nvars();
        let mut b: Vec<usize> = basic.to_vec();
        b.sort_unstable();
        b.dedup();
        let nonbasic = (0..n).filter(|j| b.binary_search(j).is_err()).collect();
        let side = (0..n).map(|j| p.default_side(j)).collect();
        Self { basic: b, nonbasic, freed: None, side }
    }

    pub fn nvars(&self) -> usize {
        self.side.len()
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.basic.binary_search(&j).is_ok()
    }

    pub fn is_nonbasic(&self, j: usize) -> bool {
        self.nonbasic.binary_search(&j).is_ok()
    }

    pub fn add_basic(&mut self, j: usize) {
        sorted_insert(&mut self.basic, j);
    }

    pub fn remove_basic(&mut self, j: usize) -> bool {
        sorted_remove(&mut self.basic, j)
    }

    pub fn add_nonbasic(&mut self, j: usize, side: Side) {
        self.side[j] = side;
        sorted_insert(&mut self.nonbasic, j);
    }

    pub fn remove_nonbasic(&mut self, j: usize) -> bool {
        sorted_remove(&mut self.nonbasic, j)
    }

    /// Disjointness and coverage check.
    pub fn is_consistent(&self) -> bool {
        let n = self.nvars();
        let mut seen = vec![false; n];
        let all = self.basic.iter().chain(self.nonbasic.iter()).chain(self.freed.iter());
        for &j in all {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Basic set with `extra` merged in, sorted.
    pub fn basic_with(&self, extra: usize) -> Vec<usize> {
        let mut b = self.basic.clone();
        sorted_insert(&mut b, extra);
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vector,
    pub y: Vector,
    pub z: Vector,
}

impl Iterate {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: Vector::zeros(n), y: Vector::zeros(m), z: Vector::zeros(n) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    /// Freed variable moves by one unit.
    Base,
    /// Freed variable's dual moves by one unit.
    Intermediate,
}

/// Search direction for a subiteration with freed index `freed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: Vector,
    pub dy: Vector,
    pub dz: Vector,
    pub dx_l: f64,
    pub dz_l: f64,
    pub freed: usize,
    pub kind: DirectionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub stationarity_residual: f64,
    pub equality_residual: f64,
    pub worst_primal_violation: f64,
    pub worst_dual_violation: f64,
    pub complementarity: f64,
    pub optimal: bool,
}

/// `½xᵀHx + ½yᵀMy + cᵀx + rᵀx`.
pub fn primal_objective(p: &QpProblem, s: &Shifts, it: &Iterate) -> f64 {
    let hx = p.hessian() * &it.x;
    let my = p.regularization() * &it.y;
    0.5 * it.x.dot(&hx) + 0.5 * it.y.dot(&my) + p.cost().dot(&it.x) + s.r.dot(&it.x)
}

/// Dual objective. For the default bound `x ≥ 0` this is
/// `−½xᵀHx − ½yᵀMy + bᵀy − qᵀz`; general bounds contribute
/// `(lower − q)ᵀz_L − (upper + q_upper)ᵀz_U` with `z = z_L − z_U` split
/// according to the sign of `z + r`.
pub fn dual_objective(p: &QpProblem, s: &Shifts, it: &Iterate) -> f64 {
    let hx = p.hessian() * &it.x;
    let my = p.regularization() * &it.y;
    let mut f = -0.5 * it.x.dot(&hx) - 0.5 * it.y.dot(&my) + p.rhs().dot(&it.y);
    for j in 0..p.nvars() {
        f += bound_term(p, s, j, it.z[j]);
    }
    f
}

fn bound_term(p: &QpProblem, s: &Shifts, j: usize, z: f64) -> f64 {
    let lo = p.lower_shifted(s, j);
    let hi = p.upper_shifted(s, j);
    match p.bound_kind(j) {
        BoundKind::Lower => lo * z,
        BoundKind::Upper => hi * z,
        BoundKind::Free => 0.0,
        BoundKind::Both => {
            let rho = s.r[j];
            let w = z + rho;
            let (r_lo, r_hi) = (rho.max(0.0), (-rho).max(0.0));
            lo * (w.max(0.0) - r_lo) - hi * ((-w).max(0.0) - r_hi)
        }
    }
}

/// Value of `f_P − f_D` at any solution of the shifted pair. Equals `−qᵀr`
/// under the default bound.
pub fn shift_gap(p: &QpProblem, s: &Shifts) -> f64 {
    let mut g = 0.0;
    for j in 0..p.nvars() {
        let rho = s.r[j];
        if rho == 0.0 {
            continue;
        }
        g += match p.bound_kind(j) {
            BoundKind::Lower => p.lower_shifted(s, j) * rho,
            BoundKind::Upper => p.upper_shifted(s, j) * rho,
            BoundKind::Free => 0.0,
            BoundKind::Both => p.lower_shifted(s, j) * rho.max(0.0) - p.upper_shifted(s, j) * (-rho).max(0.0),
        };
    }
    g
}

/// `(Hx + c − Aᵀy − z, Ax + My − b)`.
pub fn residuals(p: &QpProblem, it: &Iterate) -> (Vector, Vector) {
    let stat = p.hessian() * &it.x + p.cost() - p.constraints().tr_mul(&it.y) - &it.z;
    let eq = p.constraints() * &it.x + p.regularization() * &it.y - p.rhs();
    (stat, eq)
}

/// Scale used for dual sign tests: `max(1, ‖y‖∞)`.
pub fn dual_scale(it: &Iterate) -> f64 {
    it.y.amax().max(1.0)
}

/// Evaluates stationarity, equality, primal and dual sign conditions and
/// complementarity for the pair shifted by `s`.
pub fn check_optimality(p: &QpProblem, s: &Shifts, it: &Iterate, eps_fea: f64, eps_opt: f64) -> OptimalityReport {
    let (stat, eq) = residuals(p, it);
    let stationarity_residual = stat.amax();
    let equality_residual = eq.amax();
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    for j in 0..p.nvars() {
        let x = it.x[j];
        let w = it.z[j] + s.r[j];
        let lo = p.lower_shifted(s, j);
        let hi = p.upper_shifted(s, j);
        let slack_lo = x - lo;
        let slack_hi = hi - x;
        primal = primal.max(-slack_lo).max(-slack_hi);
        let (dv, cv) = match p.bound_kind(j) {
            BoundKind::Lower => ((-w).max(0.0), slack_lo.max(0.0).min(w.abs())),
            BoundKind::Upper => (w.max(0.0), slack_hi.max(0.0).min(w.abs())),
            BoundKind::Free => (w.abs(), 0.0),
            BoundKind::Both => {
                let c = if w >= 0.0 { slack_lo.max(0.0).min(w) } else { slack_hi.max(0.0).min(-w) };
                (0.0, c)
            }
        };
        dual = dual.max(dv);
        comp = comp.max(cv);
    }
    let res_tol = RESIDUAL_TOL * p.data_scale();
    let dual_tol = eps_opt * dual_scale(it);
    let optimal = stationarity_residual <= res_tol
        && equality_residual <= res_tol
        && primal <= eps_fea
        && dual <= dual_tol
        && comp <= eps_fea.max(dual_tol);
    OptimalityReport {
        stationarity_residual,
        equality_residual,
        worst_primal_violation: primal,
        worst_dual_violation: dual,
        complementarity: comp,
        optimal,
    }
}
