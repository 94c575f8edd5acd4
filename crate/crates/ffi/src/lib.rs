//! C interface to the `shiftqp` solver.
//!
//! Problems and solutions are opaque heap objects released with their
//! `*_free` function. Every fallible call returns a [`ShiftqpError`] code;
//! on failure a description is kept per thread and can be fetched with
//! [`shiftqp_last_error_message`]. Panics never cross the boundary; they
//! surface as [`ShiftqpError::Panic`].

use shiftqp::cli::format::{parse_str, ProblemFile};
use shiftqp::driver::{solve_pdqp, GeneralQp, PdqpSolution, SolveStatus, SolverConfig, Strategy};
use shiftqp::engine::SolveError;
use shiftqp::model::{Matrix, Vector};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftqpError {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidProblem = 3,
    ParseError = 4,
    Io = 5,
    SolverInternal = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Final status of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftqpSolveStatus {
    Optimal = 0,
    PrimalInfeasible = 1,
    DualInfeasible = 2,
    IterationLimit = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftqpStrategy {
    Auto = 0,
    PrimalFirst = 1,
    DualFirst = 2,
    PrimalOnly = 3,
    DualOnly = 4,
}

/// Solver options; fill with [`shiftqp_options_default`] before changing
/// individual fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShiftqpOptions {
    pub opt_tol: f64,
    pub fea_tol: f64,
    pub max_iter: usize,
    pub strategy: ShiftqpStrategy,
}

/// Opaque problem handle.
pub struct ShiftqpProblem {
    inner: GeneralQp,
    name: Option<CString>,
}

/// Opaque solution handle.
pub struct ShiftqpSolution {
    inner: PdqpSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(code: ShiftqpError, msg: impl Into<String>) -> ShiftqpError {
    set_error(msg);
    code
}

/// Run `f`, clearing the last error first and turning a panic into a code.
fn guard(f: impl FnOnce() -> ShiftqpError) -> ShiftqpError {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ShiftqpError::Panic, format!("panic: {what}"))
        }
    }
}

/// Borrow `len` doubles; a null pointer is only accepted for `len == 0`.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ShiftqpError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ShiftqpError::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, ShiftqpError> {
    if p.is_null() {
        return Err(fail(ShiftqpError::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(ShiftqpError::InvalidArgument, format!("{what} is not UTF-8")))
}

fn boxed_problem(file: ProblemFile) -> Box<ShiftqpProblem> {
    let name = file.name.and_then(|n| CString::new(n).ok());
    Box::new(ShiftqpProblem { inner: file.problem, name })
}

fn status_code(s: SolveStatus) -> ShiftqpSolveStatus {
    match s {
        SolveStatus::Optimal => ShiftqpSolveStatus::Optimal,
        SolveStatus::PrimalInfeasible => ShiftqpSolveStatus::PrimalInfeasible,
        SolveStatus::DualInfeasible => ShiftqpSolveStatus::DualInfeasible,
        SolveStatus::IterationLimit => ShiftqpSolveStatus::IterationLimit,
    }
}

fn strategy(s: ShiftqpStrategy) -> Strategy {
    match s {
        ShiftqpStrategy::Auto => Strategy::Auto,
        ShiftqpStrategy::PrimalFirst => Strategy::PrimalFirst,
        ShiftqpStrategy::DualFirst => Strategy::DualFirst,
        ShiftqpStrategy::PrimalOnly => Strategy::PrimalOnly,
        ShiftqpStrategy::DualOnly => Strategy::DualOnly,
    }
}

/// Length of the message returned by [`shiftqp_last_error_message`],
/// including the terminating NUL; 0 when the last call on this thread
/// succeeded.
#[no_mangle]
pub extern "C" fn shiftqp_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes_with_nul().len()))
}

/// Copy the last error message of this thread into `buf`. An empty string
/// is written when there is none.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_last_error_message(buf: *mut c_char, len: usize) -> ShiftqpError {
    if buf.is_null() {
        return ShiftqpError::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&b"\0"[..], |s| s.as_bytes_with_nul());
        if bytes.len() > len {
            return ShiftqpError::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
        ShiftqpError::Ok
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shiftqp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a problem from dense row-major data:
/// `hessian` is `n × n`, `constraints` is `m × n`, `cost` has `n` entries and
/// `lower`/`upper` have `n + m` entries (variables, then rows). Infinite
/// bounds are allowed.
///
/// # Safety
/// Each pointer must reference the stated number of doubles (or be null
/// when that number is zero); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_new(
    n: usize,
    m: usize,
    hessian: *const f64,
    constraints: *const f64,
    cost: *const f64,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut ShiftqpProblem,
) -> ShiftqpError {
    guard(|| {
        if out.is_null() {
            return fail(ShiftqpError::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let (Some(nn), Some(mn), Some(nm)) = (n.checked_mul(n), m.checked_mul(n), n.checked_add(m)) else {
            return fail(ShiftqpError::InvalidArgument, "dimensions overflow");
        };
        let read = || -> Result<GeneralQp, ShiftqpError> {
            let h = doubles(hessian, nn, "hessian")?;
            let a = doubles(constraints, mn, "constraints")?;
            let c = doubles(cost, n, "cost")?;
            let lo = doubles(lower, nm, "lower")?;
            let hi = doubles(upper, nm, "upper")?;
            let finite = h.iter().chain(a).chain(c).all(|v| v.is_finite());
            if !finite {
                return Err(fail(ShiftqpError::InvalidProblem, "hessian, constraints and cost must be finite"));
            }
            let h = Matrix::from_row_slice(n, n, h);
            if h != h.transpose() {
                return Err(fail(ShiftqpError::InvalidProblem, "hessian is not symmetric"));
            }
            GeneralQp::new(
                h,
                Matrix::from_row_slice(m, n, a),
                Vector::from_row_slice(c),
                Vector::from_row_slice(lo),
                Vector::from_row_slice(hi),
            )
            .map_err(|e| fail(ShiftqpError::InvalidProblem, e.to_string()))
        };
        match read() {
            Ok(g) => {
                *out = Box::into_raw(Box::new(ShiftqpProblem { inner: g, name: None }));
                ShiftqpError::Ok
            }
            Err(code) => code,
        }
    })
}

/// Parse a problem from the text of a `.qpt` file.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_parse(source: *const c_char, out: *mut *mut ShiftqpProblem) -> ShiftqpError {
    guard(|| {
        if out.is_null() {
            return fail(ShiftqpError::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let src = match text(source, "source") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match parse_str(src) {
            Ok(file) => {
                *out = Box::into_raw(boxed_problem(file));
                ShiftqpError::Ok
            }
            Err(e) => fail(ShiftqpError::ParseError, e.to_string()),
        }
    })
}

/// Read and parse a `.qpt` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_read(path: *const c_char, out: *mut *mut ShiftqpProblem) -> ShiftqpError {
    guard(|| {
        if out.is_null() {
            return fail(ShiftqpError::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match text(path, "path") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let src = match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => return fail(ShiftqpError::Io, format!("{path}: {e}")),
        };
        match parse_str(&src) {
            Ok(file) => {
                *out = Box::into_raw(boxed_problem(file));
                ShiftqpError::Ok
            }
            Err(e) => fail(ShiftqpError::ParseError, format!("{path}: {e}")),
        }
    })
}

/// Release a problem; null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_free(problem: *mut ShiftqpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of variables and constraint rows.
///
/// # Safety
/// `problem` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_dims(
    problem: *const ShiftqpProblem,
    n: *mut usize,
    m: *mut usize,
) -> ShiftqpError {
    guard(|| {
        if problem.is_null() || n.is_null() || m.is_null() {
            return fail(ShiftqpError::NullPointer, "null argument");
        }
        *n = (*problem).inner.nvars();
        *m = (*problem).inner.ncons();
        ShiftqpError::Ok
    })
}

/// Name given in the problem file, or null. The string lives as long as
/// the problem.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_problem_name(problem: *const ShiftqpProblem) -> *const c_char {
    if problem.is_null() {
        return ptr::null();
    }
    (*problem).name.as_ref().map_or(ptr::null(), |s| s.as_ptr())
}

/// Write the default options into `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_options_default(out: *mut ShiftqpOptions) -> ShiftqpError {
    guard(|| {
        if out.is_null() {
            return fail(ShiftqpError::NullPointer, "out is null");
        }
        let d = SolverConfig::default();
        *out = ShiftqpOptions {
            opt_tol: d.eps_opt,
            fea_tol: d.eps_fea,
            max_iter: d.max_iter,
            strategy: ShiftqpStrategy::Auto,
        };
        ShiftqpError::Ok
    })
}

/// Solve `problem`. `options` may be null for the defaults. A solve that
/// ends infeasible, unbounded or at the iteration limit still returns
/// `SHIFTQP_ERROR_OK`; query the status of the solution.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solve(
    problem: *const ShiftqpProblem,
    options: *const ShiftqpOptions,
    out: *mut *mut ShiftqpSolution,
) -> ShiftqpError {
    guard(|| {
        if out.is_null() {
            return fail(ShiftqpError::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        if problem.is_null() {
            return fail(ShiftqpError::NullPointer, "problem is null");
        }
        let mut config = SolverConfig::default();
        if !options.is_null() {
            let o = *options;
            if !(o.opt_tol > 0.0 && o.fea_tol > 0.0) {
                return fail(ShiftqpError::InvalidArgument, "tolerances must be positive");
            }
            config = SolverConfig {
                eps_opt: o.opt_tol,
                eps_fea: o.fea_tol,
                max_iter: o.max_iter,
                strategy: strategy(o.strategy),
            };
        }
        match solve_pdqp(&(*problem).inner, &config) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(ShiftqpSolution { inner: sol }));
                ShiftqpError::Ok
            }
            Err(e @ SolveError::Model(_)) => fail(ShiftqpError::InvalidProblem, e.to_string()),
            Err(e @ SolveError::InvalidStart(_)) => fail(ShiftqpError::InvalidArgument, e.to_string()),
            Err(e @ SolveError::Singular(_)) => fail(ShiftqpError::SolverInternal, e.to_string()),
        }
    })
}

/// Release a solution; null is ignored.
///
/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_free(solution: *mut ShiftqpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle; `status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_status(
    solution: *const ShiftqpSolution,
    status: *mut ShiftqpSolveStatus,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() || status.is_null() {
            return fail(ShiftqpError::NullPointer, "null argument");
        }
        *status = status_code((*solution).inner.status);
        ShiftqpError::Ok
    })
}

/// Objective `½xᵀHx + cᵀx` at the final point.
///
/// # Safety
/// `solution` must be a live handle; `objective` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_objective(
    solution: *const ShiftqpSolution,
    objective: *mut f64,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() || objective.is_null() {
            return fail(ShiftqpError::NullPointer, "null argument");
        }
        *objective = (*solution).inner.objective;
        ShiftqpError::Ok
    })
}

/// Total iterations and subiterations over both stages.
///
/// # Safety
/// `solution` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_iterations(
    solution: *const ShiftqpSolution,
    iterations: *mut usize,
    subiterations: *mut usize,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() || iterations.is_null() || subiterations.is_null() {
            return fail(ShiftqpError::NullPointer, "null argument");
        }
        *iterations = (*solution).inner.inner.total_iterations();
        *subiterations = (*solution).inner.inner.total_subiterations();
        ShiftqpError::Ok
    })
}

unsafe fn copy_out(v: &Vector, buf: *mut f64, len: usize) -> ShiftqpError {
    if v.len() > len {
        return fail(ShiftqpError::BufferTooSmall, format!("need {} entries, got {len}", v.len()));
    }
    if v.is_empty() {
        return ShiftqpError::Ok;
    }
    if buf.is_null() {
        return fail(ShiftqpError::NullPointer, "buffer is null");
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
    ShiftqpError::Ok
}

/// Copy the `n` primal values into `buf`.
///
/// # Safety
/// `solution` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_x(
    solution: *const ShiftqpSolution,
    buf: *mut f64,
    len: usize,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() {
            return fail(ShiftqpError::NullPointer, "solution is null");
        }
        copy_out(&(*solution).inner.x, buf, len)
    })
}

/// Copy the `m` row multipliers into `buf`.
///
/// # Safety
/// `solution` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_y(
    solution: *const ShiftqpSolution,
    buf: *mut f64,
    len: usize,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() {
            return fail(ShiftqpError::NullPointer, "solution is null");
        }
        copy_out(&(*solution).inner.y, buf, len)
    })
}

/// Copy the `n` variable-bound multipliers into `buf`.
///
/// # Safety
/// `solution` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shiftqp_solution_z(
    solution: *const ShiftqpSolution,
    buf: *mut f64,
    len: usize,
) -> ShiftqpError {
    guard(|| {
        if solution.is_null() {
            return fail(ShiftqpError::NullPointer, "solution is null");
        }
        copy_out(&(*solution).inner.z, buf, len)
    })
}
