mod common;

use common::{large_strictly_convex, random_general, rng};
use shiftqp::driver::{solve_pdqp, solve_pdqp_traced, GeneralQp, SolveStatus, SolverConfig, Strategy};
use shiftqp::engine::SolveError;
use shiftqp::model::{Matrix, Vector};
use shiftqp::trace::{TraceEvent, VecSink};

fn config(strategy: Strategy) -> SolverConfig {
    SolverConfig { strategy, ..Default::default() }
}

/// Largest bound violation of `(x, Ax)` in the original problem.
fn violation(g: &GeneralQp, x: &Vector) -> f64 {
    let ax = &g.constraints * x;
    let vals = x.iter().chain(ax.iter());
    vals.enumerate().map(|(j, &v)| (g.lower[j] - v).max(v - g.upper[j]).max(0.0)).fold(0.0, f64::max)
}

#[test]
fn recovered_optima_satisfy_the_original_problem() {
    let mut r = rng(77);
    let mut optimal = 0;
    for _ in 0..150 {
        let g = random_general(&mut r);
        let sol = solve_pdqp(&g, &config(Strategy::Auto)).unwrap();
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        optimal += 1;
        assert!(violation(&g, &sol.x) <= 1e-8, "bound violation {:e}", violation(&g, &sol.x));
        // stationarity of the original Lagrangian: Hx + c = Aᵀy + z
        let grad = &g.hessian * &sol.x + &g.cost;
        let res = &grad - g.constraints.transpose() * &sol.y - sol.z.rows(0, g.nvars());
        assert!(res.amax() <= 1e-8 * (1.0 + grad.amax()), "stationarity {:e}", res.amax());
        assert!((sol.objective - g.objective(&sol.x)).abs() <= 1e-12 * (1.0 + sol.objective.abs()));
    }
    assert!(optimal > 50);
}

#[test]
fn iteration_budget_spans_both_stages() {
    let g = large_strictly_convex(&mut rng(9), 60, 12);
    let full = solve_pdqp(&g, &config(Strategy::PrimalFirst)).unwrap();
    assert_eq!(full.status, SolveStatus::Optimal);
    let total = full.inner.total_iterations();
    assert!(total >= 2);
    for cap in 0..total {
        let sol = solve_pdqp(&g, &SolverConfig { max_iter: cap, ..config(Strategy::PrimalFirst) }).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit, "cap {cap}");
        assert!(sol.inner.total_iterations() <= cap);
        assert_eq!(sol.inner.stage_iterations(1) + sol.inner.stage_iterations(2), sol.inner.total_iterations());
    }
    let exact = solve_pdqp(&g, &SolverConfig { max_iter: total, ..config(Strategy::PrimalFirst) }).unwrap();
    assert_eq!(exact.status, SolveStatus::Optimal);
}

/// min ½x₁² + c₁x₁ + x₂ s.t. `rhs_lo` ≤ x₁ + x₂ ≤ 1, x ≥ 0.
fn two_var(c1: f64, rhs_lo: f64) -> GeneralQp {
    GeneralQp::new(
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        Vector::from_vec(vec![c1, 1.0]),
        Vector::from_vec(vec![0.0, 0.0, rhs_lo]),
        Vector::from_vec(vec![f64::INFINITY, f64::INFINITY, 1.0]),
    )
    .unwrap()
}

#[test]
fn single_method_strategies_check_their_start() {
    // a lower row bound above the start makes it primal infeasible
    let g = two_var(-0.5, 0.5);
    let err = solve_pdqp(&g, &config(Strategy::PrimalOnly)).unwrap_err();
    assert!(matches!(err, SolveError::InvalidStart(_)), "{err}");
    let sol = solve_pdqp(&g, &config(Strategy::DualOnly)).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective + 0.125).abs() < 1e-12, "{}", sol.objective);
    assert!((sol.x[0] - 0.5).abs() < 1e-12 && sol.x[1].abs() < 1e-12);
    for s in [Strategy::Auto, Strategy::PrimalFirst, Strategy::DualFirst] {
        let other = solve_pdqp(&g, &config(s)).unwrap();
        assert!((other.objective - sol.objective).abs() < 1e-12, "{s}");
    }
}

#[test]
fn stages_are_numbered_and_traced() {
    let g = two_var(-0.5, 0.5);
    for (strategy, methods) in [(Strategy::PrimalFirst, 2), (Strategy::DualFirst, 2), (Strategy::DualOnly, 1)] {
        let mut sink = VecSink::default();
        let sol = solve_pdqp_traced(&g, &config(strategy), &mut sink).unwrap();
        let stages: Vec<usize> = sink
            .events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Stage(s) => Some(s.stage),
                _ => None,
            })
            .collect();
        assert!(!stages.is_empty() && stages.len() <= methods, "{strategy}: {stages:?}");
        assert_eq!(stages, (1..=stages.len()).collect::<Vec<_>>());
        assert_eq!(sol.inner.stages.len(), stages.len());
        let steps = sink.steps().count();
        assert_eq!(steps, sol.inner.total_subiterations(), "{strategy}");
    }
}
