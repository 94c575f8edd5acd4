//! KKT systems: factorization of the basic matrix
//!
//! ```text
//! K_B = [ H_BB  A_Bᵀ ]
//!       [ A_B   −M   ]
//! ```
//!
//! discovery of an initial basis with nonsingular `K_B`, and the two search
//! directions (unit step in the freed variable, or unit step in its dual).

mod ldl;

use crate::model::{Direction, DirectionKind, Iterate, Matrix, Partition, QpProblem, Shifts, Vector};
use ldl::Ldl;
use thiserror::Error;

/// Pivots at or below this multiple of `‖K‖∞` count as zero.
pub const PIVOT_TOL: f64 = 1e-11;

/// `K_B` (or a bordered variant) was found singular. `null_vector` lies in
/// its kernel, ordered like the matrix: basic variables, then multipliers
/// (the multiplier block of the unknown is `−y`).
#[derive(Debug, Clone, Error)]
#[error("KKT matrix for basis of size {basis_len} is singular (rank {rank} of {dim})", basis_len = basis.len())]
pub struct SingularReport {
    pub basis: Vec<usize>,
    pub rank: usize,
    pub dim: usize,
    pub null_vector: Vector,
}

/// Factor of `K_B` for one basis. Immutable once built.
#[derive(Debug, Clone)]
pub struct KktFactorization {
    basis: Vec<usize>,
    ncons: usize,
    matrix: Matrix,
    ldl: Ldl,
}

/// Basis found by factoring the full KKT matrix with deferred pivots.
#[derive(Debug, Clone)]
pub struct SocBasisResult {
    pub partition: Partition,
    pub deferred: Vec<usize>,
}

/// `[H_BB A_Bᵀ; A_B −M]` for the ordered index list `basis`.
pub fn kkt_matrix(p: &QpProblem, basis: &[usize]) -> Matrix {
    let nb = basis.len();
    let m = p.ncons();
    let h = p.hessian();
    let a = p.constraints();
    let mut k = Matrix::zeros(nb + m, nb + m);
    for (jj, &j) in basis.iter().enumerate() {
        for (ii, &i) in basis.iter().enumerate() {
            k[(ii, jj)] = h[(i, j)];
        }
        for r in 0..m {
            k[(nb + r, jj)] = a[(r, j)];
            k[(jj, nb + r)] = a[(r, j)];
        }
    }
    for c in 0..m {
        for r in 0..m {
            k[(nb + r, nb + c)] = -p.regularization()[(r, c)];
        }
    }
    k
}

fn inf_norm(k: &Matrix) -> f64 {
    k.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn factor_matrix(k: &Matrix, preferred: Option<&[bool]>) -> Ldl {
    let tol = PIVOT_TOL * inf_norm(k);
    Ldl::factor(k.as_slice(), k.nrows(), tol, preferred)
}

/// Factor `K_B` for an explicit basis list (order is preserved).
pub fn factor_basis(p: &QpProblem, basis: &[usize]) -> Result<KktFactorization, SingularReport> {
    let matrix = kkt_matrix(p, basis);
    let ldl = factor_matrix(&matrix, None);
    let dim = ldl.dim();
    if ldl.rank() < dim {
        let nv = ldl.null_vector(ldl.rank());
        return Err(SingularReport { basis: basis.to_vec(), rank: ldl.rank(), dim, null_vector: Vector::from_vec(nv) });
    }
    Ok(KktFactorization { basis: basis.to_vec(), ncons: p.ncons(), matrix, ldl })
}

/// Factor `K_B` for the basic set of `part`.
pub fn factor_kb(p: &QpProblem, part: &Partition) -> Result<KktFactorization, SingularReport> {
    factor_basis(p, &part.basic)
}

/// Refactor after one basis change. Always rebuilds from scratch; an
/// unchanged basis returns a copy of `old`.
pub fn refactor_after_swap(
    p: &QpProblem,
    part: &Partition,
    old: &KktFactorization,
    removed: Option<usize>,
    added: Option<usize>,
) -> Result<KktFactorization, SingularReport> {
    if removed.is_none() && added.is_none() && old.basis == part.basic {
        return Ok(old.clone());
    }
    factor_kb(p, part)
}

impl KktFactorization {
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Position of variable `j` in the basis list.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.basis.iter().position(|&b| b == j)
    }

    /// Solve `K_B w = rhs` with one step of iterative refinement.
    pub fn solve(&self, rhs: &Vector) -> Vector {
        let w = Vector::from_vec(self.ldl.solve(rhs.as_slice()));
        let r = rhs - &self.matrix * &w;
        let dw = Vector::from_vec(self.ldl.solve(r.as_slice()));
        w + dw
    }

    /// Split a solution `[u; −v]` into `(u, v)`.
    fn split(&self, w: &Vector) -> (Vector, Vector) {
        let nb = self.basis.len();
        let u = w.rows(0, nb).clone_owned();
        let v = -w.rows(nb, self.ncons).clone_owned();
        (u, v)
    }
}

fn finish_direction(
    p: &QpProblem,
    basis: &[usize],
    l: usize,
    dx: Vector,
    dy: Vector,
    kind: DirectionKind,
    dz_l: Option<f64>,
) -> Direction {
    let mut dz = p.hessian() * &dx - p.constraints().tr_mul(&dy);
    for &b in basis {
        if b != l {
            dz[b] = 0.0;
        }
    }
    if let Some(v) = dz_l {
        dz[l] = v;
    }
    let dx_l = dx[l];
    let dz_l = dz[l];
    Direction { dx, dy, dz, dx_l, dz_l, freed: l, kind }
}

/// Direction with `Δx_l = sign`, from the factor of `K_B` (`l` not in the
/// basis): `K_B [Δx_B; −Δy] = −sign·[h_Bl; a_l]`.
pub(crate) fn base_direction(p: &QpProblem, f: &KktFactorization, l: usize, sign: f64) -> Direction {
    let n = p.nvars();
    let m = p.ncons();
    let nb = f.basis.len();
    let mut rhs = Vector::zeros(nb + m);
    for (ii, &i) in f.basis.iter().enumerate() {
        rhs[ii] = -sign * p.hessian()[(i, l)];
    }
    for r in 0..m {
        rhs[nb + r] = -sign * p.constraints()[(r, l)];
    }
    let w = f.solve(&rhs);
    let (u, dy) = f.split(&w);
    let mut dx = Vector::zeros(n);
    for (ii, &i) in f.basis.iter().enumerate() {
        dx[i] = u[ii];
    }
    dx[l] = sign;
    finish_direction(p, &f.basis, l, dx, dy, DirectionKind::Base, None)
}

/// Direction with `Δz_l = sign`, from the factor of `K_l` (a basis that
/// contains `l`): `K_l [Δx; −Δy] = sign·e_l`.
pub(crate) fn intermediate_direction(p: &QpProblem, f: &KktFactorization, l: usize, sign: f64) -> Direction {
    let n = p.nvars();
    let m = p.ncons();
    let nb = f.basis.len();
    let pos = f.position(l).expect("freed index must belong to the bordered basis");
    let mut rhs = Vector::zeros(nb + m);
    rhs[pos] = sign;
    let w = f.solve(&rhs);
    let (u, dy) = f.split(&w);
    let mut dx = Vector::zeros(n);
    for (ii, &i) in f.basis.iter().enumerate() {
        dx[i] = u[ii];
    }
    finish_direction(p, &f.basis, l, dx, dy, DirectionKind::Intermediate, Some(sign))
}

/// Base direction for the freed index `l` with `Δx_l = 1`.
pub fn solve_base_primal(p: &QpProblem, part: &Partition, f: &KktFactorization, l: usize) -> Direction {
    debug_assert!(!part.is_basic(l) && !part.is_nonbasic(l));
    debug_assert_eq!(f.basis(), part.basic.as_slice());
    base_direction(p, f, l, 1.0)
}

/// Intermediate direction for the freed index `l` with `Δz_l = 1`.
pub fn solve_intermediate_primal(p: &QpProblem, part: &Partition, l: usize) -> Result<Direction, SingularReport> {
    let f = factor_basis(p, &part.basic_with(l))?;
    Ok(intermediate_direction(p, &f, l, 1.0))
}

/// `z_N = (Hx + c − Aᵀy)_N`, in the order of `part.nonbasic`.
pub fn recover_z_nonbasic(p: &QpProblem, part: &Partition, it: &Iterate, _s: &Shifts) -> Vector {
    let g = p.hessian() * &it.x + p.cost() - p.constraints().tr_mul(&it.y);
    Vector::from_iterator(part.nonbasic.len(), part.nonbasic.iter().map(|&j| g[j]))
}

/// Recompute `x_B` and `y` from the current off-basis `x` and on-basis `z`,
/// then `z` off the basis from stationarity.
pub(crate) fn refresh_iterate(p: &QpProblem, f: &KktFactorization, it: &mut Iterate) {
    let n = p.nvars();
    let m = p.ncons();
    let nb = f.basis.len();
    let mut in_basis = vec![false; n];
    for &b in &f.basis {
        in_basis[b] = true;
    }
    let mut x_off = it.x.clone();
    for &b in &f.basis {
        x_off[b] = 0.0;
    }
    let hx = p.hessian() * &x_off;
    let ax = p.constraints() * &x_off;
    let mut rhs = Vector::zeros(nb + m);
    for (ii, &i) in f.basis.iter().enumerate() {
        rhs[ii] = -p.cost()[i] - hx[i] + it.z[i];
    }
    for r in 0..m {
        rhs[nb + r] = p.rhs()[r] - ax[r];
    }
    let w = f.solve(&rhs);
    let (u, y) = f.split(&w);
    for (ii, &i) in f.basis.iter().enumerate() {
        it.x[i] = u[ii];
    }
    it.y = y;
    let g = p.hessian() * &it.x + p.cost() - p.constraints().tr_mul(&it.y);
    for j in 0..n {
        if !in_basis[j] {
            it.z[j] = g[j];
        }
    }
}

/// Pick an initial basis whose `K_B` is nonsingular by factoring the full
/// KKT matrix and deferring columns that would give zero pivots. Free
/// variables are preferred pivots; every multiplier row is kept.
pub fn find_soc_basis(p: &QpProblem) -> SocBasisResult {
    let n = p.nvars();
    let m = p.ncons();
    let all: Vec<usize> = (0..n).collect();
    let k = kkt_matrix(p, &all);
    let preferred: Vec<bool> = (0..n + m).map(|i| i < n && p.is_free(i)).collect();
    let ldl = factor_matrix(&k, Some(&preferred));
    let order = ldl.order();
    let mut accepted: Vec<usize> = order[..ldl.rank()].to_vec();
    let deferred_rows: Vec<usize> = order[ldl.rank()..].iter().copied().filter(|&i| i >= n).collect();
    for yi in deferred_rows {
        // exchange a primal column for the missing multiplier row
        let mut xs: Vec<usize> = accepted.iter().copied().filter(|&i| i < n).collect();
        xs.sort_unstable_by(|a, b| b.cmp(a));
        for xj in xs {
            let mut trial: Vec<usize> = accepted.iter().copied().filter(|&i| i != xj).collect();
            trial.push(yi);
            let sub = k.select_rows(&trial).select_columns(&trial);
            if factor_matrix(&sub, None).rank() == trial.len() {
                accepted = trial;
                break;
            }
        }
    }
    let mut basic: Vec<usize> = accepted.into_iter().filter(|&i| i < n).collect();
    basic.sort_unstable();
    // the principal block is nonsingular in exact arithmetic; drop columns
    // named by a null vector if roundoff disagrees
    loop {
        match factor_basis(p, &basic) {
            Ok(_) => break,
            Err(rep) => {
                let nb = basic.len();
                let worst = (0..nb).max_by(|&a, &b| {
                    rep.null_vector[a].abs().partial_cmp(&rep.null_vector[b].abs()).unwrap().then(b.cmp(&a))
                });
                match worst {
                    Some(pos) if rep.null_vector[pos] != 0.0 => {
                        basic.remove(pos);
                    }
                    _ => break,
                }
            }
        }
    }
    let partition = Partition::from_basic(p, &basic);
    let deferred = partition.nonbasic.clone();
    SocBasisResult { partition, deferred }
}
