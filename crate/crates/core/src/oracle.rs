//! Brute-force reference solver and property checkers.
//!
//! The reference solver tries every assignment of variables to "basic" or
//! "at a bound", keeps the candidates whose KKT point satisfies all sign
//! conditions, and checks they agree on the objective. When none survives,
//! primal and dual feasibility are decided by enumerating the faces of the
//! two feasible sets and projecting onto each with a minimum-norm solve.
//!
//! Only the KKT factorization is shared with the solver; everything else
//! (right-hand sides, dual recovery, objective, rank tests) is computed here
//! from scratch, and small systems are cross-checked with plain Gaussian
//! elimination.

use crate::kkt::factor_kb;
use crate::model::{BoundKind, Direction, DirectionKind, Iterate, Matrix, Partition, QpProblem, Shifts, Side, Vector};
use thiserror::Error;

/// Largest number of candidate partitions the enumeration will visit.
pub const CANDIDATE_BUDGET: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub status: OracleStatus,
    /// Optimal point; zeros when infeasible.
    pub iterate: Iterate,
    pub objective: f64,
    pub witness: Option<Partition>,
    /// Number of candidates that passed every test.
    pub witnesses: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("{candidates} candidate partitions exceed the enumeration budget")]
    BudgetExceeded { candidates: usize },
    #[error("optimal candidates disagree: objectives {first} and {other}")]
    Disagreement { first: f64, other: f64 },
    #[error("Gaussian elimination and the factorization disagree by {0:e}")]
    SolveMismatch(f64),
    #[error("both problems feasible but no optimal candidate found")]
    NoWitness,
}

/// Findings of a property check; empty means every check passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyReport {
    pub violations: Vec<String>,
}

impl PropertyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn require(&mut self, cond: bool, what: impl FnOnce() -> String) {
        if !cond {
            self.violations.push(what());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Shifted bounds coincide; any dual sign.
    Fixed,
    /// Free variable held at zero with zero dual.
    Zero,
}

fn states(p: &QpProblem, s: &Shifts, j: usize) -> Vec<State> {
    if p.pinched(s, j) {
        return vec![State::Basic, State::Fixed];
    }
    match p.bound_kind(j) {
        BoundKind::Lower => vec![State::Basic, State::Lower],
        BoundKind::Upper => vec![State::Basic, State::Upper],
        BoundKind::Both => vec![State::Basic, State::Lower, State::Upper],
        BoundKind::Free => vec![State::Basic, State::Zero],
    }
}

fn count_product(sizes: impl Iterator<Item = usize>) -> usize {
    sizes.fold(1usize, |acc, k| acc.saturating_mul(k))
}

/// Mixed-radix counter over per-variable choice lists.
fn for_each_choice(sizes: &[usize], mut f: impl FnMut(&[usize]) -> Result<(), OracleError>) -> Result<(), OracleError> {
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx)?;
        let mut k = 0;
        loop {
            if k == sizes.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.amax().max(1e-300);
    for k in 0..n {
        let (piv, val) = (k..n).map(|i| (i, m[(i, k)].abs())).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if val <= 1e-13 * scale {
            return None;
        }
        m.swap_rows(k, piv);
        x.swap_rows(k, piv);
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f != 0.0 {
                for j in k..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
                x[i] -= f * x[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut v = x[k];
        for j in k + 1..n {
            v -= m[(k, j)] * x[j];
        }
        x[k] = v / m[(k, k)];
    }
    Some(x)
}

fn objective(p: &QpProblem, s: &Shifts, it: &Iterate) -> f64 {
    let hx = p.hessian() * &it.x;
    let my = p.regularization() * &it.y;
    0.5 * it.x.dot(&hx) + 0.5 * it.y.dot(&my) + (p.cost() + &s.r).dot(&it.x)
}

fn stationarity_dual(p: &QpProblem, x: &Vector, y: &Vector) -> Vector {
    p.hessian() * x + p.cost() - p.constraints().transpose() * y
}

/// Candidate KKT point for a state assignment, or `None` if the basic
/// matrix is singular.
fn candidate_point(
    p: &QpProblem,
    s: &Shifts,
    st: &[State],
    crosscheck: bool,
) -> Result<Option<(Iterate, Partition)>, OracleError> {
    let n = p.nvars();
    let m = p.ncons();
    let basis: Vec<usize> = (0..n).filter(|&j| st[j] == State::Basic).collect();
    let mut part = Partition::from_basic(p, &basis);
    let mut x = Vector::zeros(n);
    for j in 0..n {
        match st[j] {
            State::Basic => {}
            State::Lower | State::Fixed => {
                x[j] = p.lower_shifted(s, j);
                part.side[j] = Side::Lower;
            }
            State::Upper => {
                x[j] = p.upper_shifted(s, j);
                part.side[j] = Side::Upper;
            }
            State::Zero => part.side[j] = Side::Temporary,
        }
    }
    let Ok(f) = factor_kb(p, &part) else {
        return Ok(None);
    };
    let nb = basis.len();
    let hx = p.hessian() * &x;
    let ax = p.constraints() * &x;
    let mut rhs = Vector::zeros(nb + m);
    for (ii, &i) in basis.iter().enumerate() {
        rhs[ii] = -p.cost()[i] - hx[i] - s.r[i];
    }
    for r in 0..m {
        rhs[nb + r] = p.rhs()[r] - ax[r];
    }
    let w = f.solve(&rhs);
    if crosscheck {
        if let Some(g) = gauss_solve(f.matrix(), &rhs) {
            let diff = (&g - &w).amax();
            if diff > 1e-8 * (1.0 + w.amax()) {
                if svd_rank(f.matrix()) < nb + m {
                    return Ok(None);
                }
                return Err(OracleError::SolveMismatch(diff));
            }
        }
    }
    for (ii, &i) in basis.iter().enumerate() {
        x[i] = w[ii];
    }
    let y = -w.rows(nb, m).clone_owned();
    let mut z = stationarity_dual(p, &x, &y);
    for &i in &basis {
        z[i] = -s.r[i];
    }
    Ok(Some((Iterate { x, y, z }, part)))
}

fn passes(p: &QpProblem, s: &Shifts, st: &[State], it: &Iterate, tol: f64) -> bool {
    (0..p.nvars()).all(|j| {
        let x = it.x[j];
        let w = it.z[j] + s.r[j];
        match st[j] {
            State::Basic => x >= p.lower_shifted(s, j) - tol && x <= p.upper_shifted(s, j) + tol,
            State::Lower => w >= -tol,
            State::Upper => w <= tol,
            State::Fixed => true,
            State::Zero => w.abs() <= tol,
        }
    })
}

/// Exhaustive solve of the shifted pair.
pub fn enumerate_solve(p: &QpProblem, s: &Shifts) -> Result<OracleSolution, OracleError> {
    let n = p.nvars();
    let choices: Vec<Vec<State>> = (0..n).map(|j| states(p, s, j)).collect();
    let sizes: Vec<usize> = choices.iter().map(|c| c.len()).collect();
    let total = count_product(sizes.iter().copied());
    if total > CANDIDATE_BUDGET {
        return Err(OracleError::BudgetExceeded { candidates: total });
    }
    let crosscheck = n <= 8;
    let mut best: Option<(Iterate, Partition, f64)> = None;
    let mut witnesses = 0;
    let mut st = vec![State::Basic; n];
    for_each_choice(&sizes, |idx| {
        for j in 0..n {
            st[j] = choices[j][idx[j]];
        }
        let Some((it, part)) = candidate_point(p, s, &st, crosscheck)? else {
            return Ok(());
        };
        let scale = 1.0 + it.x.amax() + it.z.amax() + it.y.amax();
        if !passes(p, s, &st, &it, 1e-10 * scale) {
            return Ok(());
        }
        let f = objective(p, s, &it);
        witnesses += 1;
        match &best {
            None => best = Some((it, part, f)),
            Some((_, _, f0)) => {
                if (f - f0).abs() > 1e-9 * (1.0 + f0.abs()) {
                    return Err(OracleError::Disagreement { first: *f0, other: f });
                }
            }
        }
        Ok(())
    })?;
    if let Some((iterate, part, objective)) = best {
        return Ok(OracleSolution {
            status: OracleStatus::Optimal,
            iterate,
            objective,
            witness: Some(part),
            witnesses,
        });
    }
    let status = if !primal_feasible(p, s)? {
        OracleStatus::PrimalInfeasible
    } else if !dual_feasible(p, s)? {
        OracleStatus::DualInfeasible
    } else {
        return Err(OracleError::NoWitness);
    };
    Ok(OracleSolution {
        status,
        iterate: Iterate::zeros(n, p.ncons()),
        objective: f64::NAN,
        witness: None,
        witnesses: 0,
    })
}

fn min_norm(a: &Matrix, b: &Vector) -> Vector {
    if a.ncols() == 0 {
        return Vector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1e-300);
    svd.solve(b, tol).expect("both factors were computed")
}

/// Is `{(x, y) : Ax + My = b, shifted bounds}` nonempty? Every minimal face
/// of this set is an affine subspace fixed by the active bounds, so the
/// minimum-norm point of each candidate face is feasible if the face is.
pub fn primal_feasible(p: &QpProblem, s: &Shifts) -> Result<bool, OracleError> {
    let n = p.nvars();
    let m = p.ncons();
    let choices: Vec<Vec<State>> = (0..n)
        .map(|j| {
            if p.pinched(s, j) {
                return vec![State::Fixed];
            }
            match p.bound_kind(j) {
                BoundKind::Lower => vec![State::Basic, State::Lower],
                BoundKind::Upper => vec![State::Basic, State::Upper],
                BoundKind::Both => vec![State::Basic, State::Lower, State::Upper],
                BoundKind::Free => vec![State::Basic],
            }
        })
        .collect();
    let sizes: Vec<usize> = choices.iter().map(|c| c.len()).collect();
    let total = count_product(sizes.iter().copied());
    if total > CANDIDATE_BUDGET {
        return Err(OracleError::BudgetExceeded { candidates: total });
    }
    let tol = 1e-9 * p.data_scale();
    let mut found = false;
    for_each_choice(&sizes, |idx| {
        if found {
            return Ok(());
        }
        let st: Vec<State> = (0..n).map(|j| choices[j][idx[j]]).collect();
        let support: Vec<usize> = (0..n).filter(|&j| st[j] == State::Basic).collect();
        let mut x = Vector::zeros(n);
        for j in 0..n {
            x[j] = match st[j] {
                State::Lower | State::Fixed => p.lower_shifted(s, j),
                State::Upper => p.upper_shifted(s, j),
                _ => 0.0,
            };
        }
        let k = support.len();
        let mut a = Matrix::zeros(m, k + m);
        for (c, &j) in support.iter().enumerate() {
            a.set_column(c, &p.constraints().column(j));
        }
        a.view_mut((0, k), (m, m)).copy_from(p.regularization());
        let rhs = p.rhs() - p.constraints() * &x;
        let sol = min_norm(&a, &rhs);
        if (&a * &sol - &rhs).amax() > tol {
            return Ok(());
        }
        for (c, &j) in support.iter().enumerate() {
            let v = sol[c];
            if v < p.lower_shifted(s, j) - tol || v > p.upper_shifted(s, j) + tol {
                return Ok(());
            }
        }
        found = true;
        Ok(())
    })?;
    Ok(found)
}

/// Is `{(x, y, z) : Hx − Aᵀy − z = −c, sign conditions on z + r}` nonempty?
pub fn dual_feasible(p: &QpProblem, s: &Shifts) -> Result<bool, OracleError> {
    let n = p.nvars();
    let m = p.ncons();
    // per index: the dual is either pinned at −r or left free in the face
    let choices: Vec<Vec<bool>> = (0..n)
        .map(|j| {
            if p.pinched(s, j) {
                return vec![true];
            }
            match p.bound_kind(j) {
                BoundKind::Free => vec![false],
                BoundKind::Both => vec![true],
                _ => vec![false, true],
            }
        })
        .collect();
    let sizes: Vec<usize> = choices.iter().map(|c| c.len()).collect();
    let total = count_product(sizes.iter().copied());
    if total > CANDIDATE_BUDGET {
        return Err(OracleError::BudgetExceeded { candidates: total });
    }
    let tol = 1e-9 * p.data_scale();
    let mut found = false;
    for_each_choice(&sizes, |idx| {
        if found {
            return Ok(());
        }
        let open: Vec<usize> = (0..n).filter(|&j| choices[j][idx[j]]).collect();
        let k = open.len();
        let mut a = Matrix::zeros(n, n + m + k);
        a.view_mut((0, 0), (n, n)).copy_from(p.hessian());
        a.view_mut((0, n), (n, m)).copy_from(&(-p.constraints().transpose()));
        for (c, &j) in open.iter().enumerate() {
            a[(j, n + m + c)] = -1.0;
        }
        // closed duals sit at z = −r
        let mut rhs = -p.cost().clone();
        for j in 0..n {
            if !choices[j][idx[j]] {
                rhs[j] -= s.r[j];
            }
        }
        let sol = min_norm(&a, &rhs);
        if (&a * &sol - &rhs).amax() > tol {
            return Ok(());
        }
        for (c, &j) in open.iter().enumerate() {
            let w = sol[n + m + c] + s.r[j];
            let ok = p.pinched(s, j)
                || match p.bound_kind(j) {
                    BoundKind::Lower => w >= -tol,
                    BoundKind::Upper => w <= tol,
                    _ => true,
                };
            if !ok {
                return Ok(());
            }
        }
        found = true;
        Ok(())
    })?;
    Ok(found)
}

/// KKT matrix for `basis`, built independently of the solver.
fn kkt(p: &QpProblem, basis: &[usize]) -> Matrix {
    let nb = basis.len();
    let m = p.ncons();
    let hb = p.hessian().select_rows(basis).select_columns(basis);
    let ab = p.constraints().select_columns(basis);
    let mut k = Matrix::zeros(nb + m, nb + m);
    k.view_mut((0, 0), (nb, nb)).copy_from(&hb);
    k.view_mut((nb, 0), (m, nb)).copy_from(&ab);
    k.view_mut((0, nb), (nb, m)).copy_from(&ab.transpose());
    k.view_mut((nb, nb), (m, m)).copy_from(&(-p.regularization()));
    k
}

/// Numerical rank from singular values.
pub fn svd_rank(k: &Matrix) -> usize {
    rank_at(k, 1e-9)
}

fn rank_at(k: &Matrix, rel: f64) -> usize {
    if k.nrows() == 0 {
        return 0;
    }
    let sv = k.clone().svd(false, false).singular_values;
    let tol = rel * sv.max().max(1e-300) * (k.nrows() as f64).sqrt();
    sv.iter().filter(|&&v| v > tol).count()
}

/// Numerical rank as an interval: singular values between the two relative
/// cut-offs count as ambiguous.
struct RankBand {
    low: usize,
    high: usize,
    dim: usize,
}

impl RankBand {
    fn of(k: &Matrix) -> Self {
        RankBand { low: rank_at(k, 1e-9), high: rank_at(k, 1e-12), dim: k.nrows() }
    }
    fn may_be_full(&self) -> bool {
        self.high == self.dim
    }
    fn may_have_deficiency(&self, d: usize) -> bool {
        self.low + d <= self.dim && self.high + d >= self.dim
    }
}

/// Structural and spectral checks on a search direction computed for the
/// partition `part` (basic set without the freed index).
pub fn check_direction_properties(p: &QpProblem, part: &Partition, d: &Direction) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let l = d.freed;
    let scale = 1.0 + d.dx.amax() + d.dy.amax() + d.dz.amax();
    let data = 1.0 + p.hessian().amax() + p.constraints().amax() + p.regularization().amax();
    let tol = 1e-9 * scale * data;
    for &j in &part.nonbasic {
        if j != l {
            rep.require(d.dx[j].abs() <= tol, || format!("dx[{j}] = {:e} on a nonbasic index", d.dx[j]));
        }
    }
    for &j in &part.basic {
        if j != l {
            rep.require(d.dz[j].abs() <= tol, || format!("dz[{j}] = {:e} on a basic index", d.dz[j]));
        }
    }
    let stat = p.hessian() * &d.dx - p.constraints().transpose() * &d.dy - &d.dz;
    let eq = p.constraints() * &d.dx + p.regularization() * &d.dy;
    rep.require(stat.amax() <= tol, || format!("stationarity residual {:e}", stat.amax()));
    rep.require(eq.amax() <= tol, || format!("equality residual {:e}", eq.amax()));
    let xz = d.dx.dot(&d.dz);
    let curv = d.dx.dot(&(p.hessian() * &d.dx)) + d.dy.dot(&(p.regularization() * &d.dy));
    let lz = d.dx_l * d.dz_l;
    let ptol = tol * scale;
    rep.require((xz - curv).abs() <= ptol, || format!("dxᵀdz = {xz:e} but curvature = {curv:e}"));
    rep.require((xz - lz).abs() <= ptol, || format!("dxᵀdz = {xz:e} but dx_l·dz_l = {lz:e}"));
    rep.require(lz >= -ptol, || format!("dx_l·dz_l = {lz:e} is negative"));
    rep.require(d.dx_l == d.dx[l] && d.dz_l == d.dz[l], || "stored freed components disagree with the vectors".into());

    let mut bordered = part.basic.clone();
    if let Err(pos) = bordered.binary_search(&l) {
        bordered.insert(pos, l);
    }
    let kb = kkt(p, &part.basic);
    let kl = kkt(p, &bordered);
    let rank_b = RankBand::of(&kb);
    let rank_l = RankBand::of(&kl);
    match d.kind {
        DirectionKind::Base => {
            rep.require(d.dx_l.abs() == 1.0, || format!("base direction has dx_l = {}", d.dx_l));
            rep.require(rank_b.may_be_full(), || "base direction on a singular basis".into());
            if d.dz_l.abs() <= tol {
                rep.require(rank_l.may_have_deficiency(1), || {
                    format!("dz_l = 0 but bordered rank {} of {}", rank_l.low, kl.nrows())
                });
                rep.require(d.dy.amax() <= tol, || "dz_l = 0 but dy is nonzero".into());
                let w = Vector::from_iterator(
                    kl.nrows(),
                    bordered.iter().map(|&j| d.dx[j]).chain((0..p.ncons()).map(|_| 0.0)),
                );
                let r = &kl * &w;
                rep.require(r.amax() <= tol, || format!("(dx, 0) not in the bordered kernel: {:e}", r.amax()));
            } else {
                rep.require(rank_l.may_be_full(), || {
                    format!("dz_l ≠ 0 but bordered rank {} of {}", rank_l.high, kl.nrows())
                });
            }
        }
        DirectionKind::Intermediate => {
            rep.require(d.dz_l.abs() == 1.0, || format!("intermediate direction has dz_l = {}", d.dz_l));
            rep.require(rank_l.may_be_full(), || "intermediate direction on a singular bordered basis".into());
            if d.dx_l.abs() <= tol {
                rep.require(rank_b.may_have_deficiency(1), || {
                    format!("dx_l = 0 but basic rank {} of {}", rank_b.low, kb.nrows())
                });
                let w = Vector::from_iterator(
                    kb.nrows(),
                    part.basic.iter().map(|&j| d.dx[j]).chain(d.dy.iter().map(|v| -v)),
                );
                rep.require(w.amax() > tol, || "dx_l = 0 with a zero null vector".into());
                let r = &kb * &w;
                rep.require(r.amax() <= tol, || format!("(dx_B, −dy) not in the basic kernel: {:e}", r.amax()));
            } else {
                rep.require(rank_b.may_be_full(), || {
                    format!("dx_l ≠ 0 but basic rank {} of {}", rank_b.high, kb.nrows())
                });
            }
        }
    }
    rep
}

/// Compare the change of the primal objective (and, when every variable has
/// only a lower bound, of the dual objective) along `d` with the closed
/// forms
///
/// ```text
/// ΔfP = dx_l·(z_l + r_l)·α + ½·dx_l·dz_l·α²
/// ΔfD = −dz_l·(x_l − bound_l)·α − ½·dx_l·dz_l·α²
/// ```
///
/// `s` must make the iterate stationary off the freed index.
pub fn check_objective_identity(p: &QpProblem, s: &Shifts, it: &Iterate, d: &Direction, alpha: f64) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let l = d.freed;
    let after = Iterate { x: &it.x + alpha * &d.dx, y: &it.y + alpha * &d.dy, z: &it.z + alpha * &d.dz };
    let f0 = objective(p, s, it);
    let f1 = objective(p, s, &after);
    let quad = 0.5 * d.dx_l * d.dz_l * alpha * alpha;
    let pred = d.dx_l * (it.z[l] + s.r[l]) * alpha + quad;
    let tol = 1e-9 * (1.0 + f0.abs() + f1.abs());
    rep.require(((f1 - f0) - pred).abs() <= tol, || format!("primal change {:e}, predicted {pred:e}", f1 - f0));
    if (0..p.nvars()).all(|j| p.bound_kind(j) == BoundKind::Lower) {
        let dual = |it: &Iterate| {
            let lo = Vector::from_iterator(p.nvars(), (0..p.nvars()).map(|j| p.lower_shifted(s, j)));
            -0.5 * it.x.dot(&(p.hessian() * &it.x)) - 0.5 * it.y.dot(&(p.regularization() * &it.y))
                + p.rhs().dot(&it.y)
                + lo.dot(&it.z)
        };
        let g0 = dual(it);
        let g1 = dual(&after);
        let pred = -d.dz_l * (it.x[l] - p.lower_shifted(s, l)) * alpha - quad;
        let tol = 1e-9 * (1.0 + g0.abs() + g1.abs());
        rep.require(((g1 - g0) - pred).abs() <= tol, || format!("dual change {:e}, predicted {pred:e}", g1 - g0));
    }
    rep
}

/// A kernel vector `(u, w)` of `K_B` splits: `H_BB u = 0`, `A_B u = 0`,
/// `A_Bᵀ v = 0` and `M v = 0` with `v = −w`.
pub fn check_kernel_split(p: &QpProblem, basis: &[usize], u: &Vector, w: &Vector) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let hb = p.hessian().select_rows(basis).select_columns(basis);
    let ab = p.constraints().select_columns(basis);
    let v = -w;
    let tol = 1e-9 * (1.0 + u.amax() + w.amax());
    let parts = [
        ("H_BB u", (&hb * u).amax()),
        ("A_B u", (&ab * u).amax()),
        ("A_Bᵀ v", (ab.transpose() * &v).amax()),
        ("M v", (p.regularization() * &v).amax()),
    ];
    for (name, val) in parts {
        rep.require(val <= tol, || format!("{name} = {val:e}"));
    }
    rep
}

/// For positive semidefinite `H`, `H_BB u = 0` forces `H_NB u = 0`.
pub fn check_semidefinite_column_kernel(h: &Matrix, basis: &[usize], u: &Vector) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let n = h.nrows();
    let nonbasic: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
    let hbb = h.select_rows(basis).select_columns(basis);
    let hnb = h.select_rows(&nonbasic).select_columns(basis);
    let tol = 1e-9 * (1.0 + h.amax()) * (1.0 + u.amax());
    let r = (&hbb * u).amax();
    if r <= tol {
        let q = (&hnb * u).amax();
        rep.require(q <= tol, || format!("H_BB u = 0 but H_NB u = {q:e}"));
    }
    rep
}
