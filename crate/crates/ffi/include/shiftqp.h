#ifndef SHIFTQP_H
#define SHIFTQP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ShiftqpError {
  SHIFTQP_ERROR_OK = 0,
  SHIFTQP_ERROR_NULL_POINTER = 1,
  SHIFTQP_ERROR_INVALID_ARGUMENT = 2,
  SHIFTQP_ERROR_INVALID_PROBLEM = 3,
  SHIFTQP_ERROR_PARSE_ERROR = 4,
  SHIFTQP_ERROR_IO = 5,
  SHIFTQP_ERROR_SOLVER_INTERNAL = 6,
  SHIFTQP_ERROR_BUFFER_TOO_SMALL = 7,
  SHIFTQP_ERROR_PANIC = 8,
} ShiftqpError;

typedef enum ShiftqpStrategy {
  SHIFTQP_STRATEGY_AUTO = 0,
  SHIFTQP_STRATEGY_PRIMAL_FIRST = 1,
  SHIFTQP_STRATEGY_DUAL_FIRST = 2,
  SHIFTQP_STRATEGY_PRIMAL_ONLY = 3,
  SHIFTQP_STRATEGY_DUAL_ONLY = 4,
} ShiftqpStrategy;

// Final status of a solve.
typedef enum ShiftqpSolveStatus {
  SHIFTQP_SOLVE_STATUS_OPTIMAL = 0,
  SHIFTQP_SOLVE_STATUS_PRIMAL_INFEASIBLE = 1,
  SHIFTQP_SOLVE_STATUS_DUAL_INFEASIBLE = 2,
  SHIFTQP_SOLVE_STATUS_ITERATION_LIMIT = 3,
} ShiftqpSolveStatus;

// Opaque problem handle.
typedef struct ShiftqpProblem ShiftqpProblem;

// Opaque solution handle.
typedef struct ShiftqpSolution ShiftqpSolution;

// Solver options; fill with [`shiftqp_options_default`] before changing
// individual fields.
typedef struct ShiftqpOptions {
  double opt_tol;
  double fea_tol;
  size_t max_iter;
  enum ShiftqpStrategy strategy;
} ShiftqpOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length of the message returned by [`shiftqp_last_error_message`],
// including the terminating NUL; 0 when the last call on this thread
// succeeded.
size_t shiftqp_last_error_length(void);

// Copy the last error message of this thread into `buf`. An empty string
// is written when there is none.
//
// # Safety
// `buf` must point to `len` writable bytes.
enum ShiftqpError shiftqp_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *shiftqp_version(void);

// Build a problem from dense row-major data:
// `hessian` is `n × n`, `constraints` is `m × n`, `cost` has `n` entries and
// `lower`/`upper` have `n + m` entries (variables, then rows). Infinite
// bounds are allowed.
//
// # Safety
// Each pointer must reference the stated number of doubles (or be null
// when that number is zero); `out` must be writable.
enum ShiftqpError shiftqp_problem_new(size_t n,
                                      size_t m,
                                      const double *hessian,
                                      const double *constraints,
                                      const double *cost,
                                      const double *lower,
                                      const double *upper,
                                      struct ShiftqpProblem **out);

// Parse a problem from the text of a `.qpt` file.
//
// # Safety
// `source` must be a NUL-terminated string; `out` must be writable.
enum ShiftqpError shiftqp_problem_parse(const char *source, struct ShiftqpProblem **out);

// Read and parse a `.qpt` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ShiftqpError shiftqp_problem_read(const char *path, struct ShiftqpProblem **out);

// Release a problem; null is ignored.
//
// # Safety
// `problem` must come from this library and not be used afterwards.
void shiftqp_problem_free(struct ShiftqpProblem *problem);

// Number of variables and constraint rows.
//
// # Safety
// `problem` must be a live handle; `n` and `m` must be writable.
enum ShiftqpError shiftqp_problem_dims(const struct ShiftqpProblem *problem, size_t *n, size_t *m);

// Name given in the problem file, or null. The string lives as long as
// the problem.
//
// # Safety
// `problem` must be a live handle or null.
const char *shiftqp_problem_name(const struct ShiftqpProblem *problem);

// Write the default options into `out`.
//
// # Safety
// `out` must be writable.
enum ShiftqpError shiftqp_options_default(struct ShiftqpOptions *out);

// Solve `problem`. `options` may be null for the defaults. A solve that
// ends infeasible, unbounded or at the iteration limit still returns
// `SHIFTQP_ERROR_OK`; query the status of the solution.
//
// # Safety
// `problem` must be a live handle, `options` null or valid, `out` writable.
enum ShiftqpError shiftqp_solve(const struct ShiftqpProblem *problem,
                                const struct ShiftqpOptions *options,
                                struct ShiftqpSolution **out);

// Release a solution; null is ignored.
//
// # Safety
// `solution` must come from this library and not be used afterwards.
void shiftqp_solution_free(struct ShiftqpSolution *solution);

// # Safety
// `solution` must be a live handle; `status` must be writable.
enum ShiftqpError shiftqp_solution_status(const struct ShiftqpSolution *solution,
                                          enum ShiftqpSolveStatus *status);

// Objective `½xᵀHx + cᵀx` at the final point.
//
// # Safety
// `solution` must be a live handle; `objective` must be writable.
enum ShiftqpError shiftqp_solution_objective(const struct ShiftqpSolution *solution,
                                             double *objective);

// Total iterations and subiterations over both stages.
//
// # Safety
// `solution` must be a live handle; the outputs must be writable.
enum ShiftqpError shiftqp_solution_iterations(const struct ShiftqpSolution *solution,
                                              size_t *iterations,
                                              size_t *subiterations);

// Copy the `n` primal values into `buf`.
//
// # Safety
// `solution` must be a live handle; `buf` must hold `len` doubles.
enum ShiftqpError shiftqp_solution_x(const struct ShiftqpSolution *solution,
                                     double *buf,
                                     size_t len);

// Copy the `m` row multipliers into `buf`.
//
// # Safety
// `solution` must be a live handle; `buf` must hold `len` doubles.
enum ShiftqpError shiftqp_solution_y(const struct ShiftqpSolution *solution,
                                     double *buf,
                                     size_t len);

// Copy the `n` variable-bound multipliers into `buf`.
//
// # Safety
// `solution` must be a live handle; `buf` must hold `len` doubles.
enum ShiftqpError shiftqp_solution_z(const struct ShiftqpSolution *solution,
                                     double *buf,
                                     size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTQP_H */
