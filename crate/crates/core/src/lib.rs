//! Active-set solver for convex quadratic programs with regularized
//! equality constraints and two-sided bounds.
//!
//! A problem is solved in two stages. Bounds and costs are first shifted so
//! that a nonsingular starting basis is already optimal; a primal and a dual
//! active-set solve then remove the shifts. Either method may start from a
//! point that is infeasible for the other one.
//!
//! ```no_run
//! use shiftqp::driver::{solve_pdqp, SolverConfig};
//! let file = shiftqp::cli::parse_problem("problem.qpt".as_ref()).unwrap();
//! let sol = solve_pdqp(&file.problem, &SolverConfig::default()).unwrap();
//! println!("{} {}", sol.status, sol.objective);
//! ```
//!
//! [`oracle`] holds a brute-force reference solver used by the tests.

pub mod cli;
pub mod driver;
pub mod dual;
pub mod engine;
pub mod kkt;
pub mod model;
pub mod oracle;
pub mod primal;
pub mod trace;
