//! Dual active-set method.
//!
//! Mirror of the primal method: dual sign conditions are kept and primal
//! bound violations are removed one index at a time. A basic variable that
//! violates its bound is freed and first moved with unit change in its dual
//! on the current basis; after a nonbasic index blocks, steps use unit change
//! in the variable on the updated basis.
//!
//! Nonbasic variables beyond their bound (relaxed starts) are eligible and go
//! straight to the second kind of step. Free variables held at a temporary
//! bound never let their dual move: a step that would change one instead
//! moves that variable into the basis with a zero step.

use crate::engine::{select, Limits, Run, SolveError, StepResult};
use crate::kkt::{base_direction, intermediate_direction};
use crate::model::{Direction, Iterate, Partition, QpProblem, Shifts, Side};
use crate::primal::StepOutcome;
use crate::trace::{Method, NullSink, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualStatus {
    Optimal,
    PrimalInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct DualOutcome {
    pub status: DualStatus,
    pub iterate: Iterate,
    pub partition: Partition,
    pub iterations: usize,
    pub subiterations: usize,
    /// Direction along which the dual objective increases without bound.
    pub certificate: Option<Direction>,
}

fn target(run: &Run, l: usize) -> f64 {
    run.bound(l, run.part.side[l])
}

/// Least temporary-bound index whose dual would move along `d`.
fn temporary_mover(run: &Run, d: &Direction) -> Option<usize> {
    let thr = Run::zero_threshold(d);
    run.part.nonbasic.iter().copied().find(|&j| run.part.side[j] == Side::Temporary && d.dz[j].abs() > thr)
}

fn take_step(run: &mut Run, d: &Direction, l: usize, alpha_star: f64) -> StepResult {
    let v = run.it.x[l] - target(run, l);
    let (eff, before) = run.snapshot();
    let basic = run.part.basic.clone();
    let nonbasic = run.part.nonbasic.clone();
    if let Some(j) = temporary_mover(run, d) {
        let step = StepResult { alpha: 0.0, alpha_star, alpha_max: 0.0, blocking: Some(j), hit_target: false };
        run.note_step(0.0);
        run.record(d, &step, v, &eff, before, basic, nonbasic, true);
        run.part.remove_nonbasic(j);
        run.part.add_basic(j);
        return step;
    }
    let (alpha_max, who) = run.dual_ratio(d);
    let step = StepResult::new(alpha_star, alpha_max, who);
    if step.is_unbounded() {
        // the certificate direction still counts as a subiteration
        run.subiterations += 1;
        return step;
    }
    run.apply(d, step.alpha);
    run.note_step(step.alpha);
    run.record(d, &step, v, &eff, before, basic, nonbasic, false);
    if step.hit_target {
        let side = run.part.side[l];
        run.it.x[l] = target(run, l);
        run.part.add_nonbasic(l, side);
        run.part.freed = None;
    } else if let Some(k) = step.blocking {
        run.it.z[k] = -run.s.r[k];
        run.part.remove_nonbasic(k);
        run.part.add_basic(k);
    }
    run.settle_pinched();
    step
}

/// Step with unit change in the freed dual on the basis that still contains
/// `l`. `l` must already be freed with its target side recorded.
pub(crate) fn base_step(run: &mut Run, l: usize) -> Result<(StepResult, Direction), SolveError> {
    let p = run.p;
    let sigma = run.part.side[l].sign();
    let old = run.part.basic_with(l);
    let f = run.factor(&old)?;
    let d = intermediate_direction(p, f, l, sigma);
    let v = run.it.x[l] - target(run, l);
    let thr = Run::zero_threshold(&d);
    let alpha_star = if sigma * d.dx_l > thr { (-v / d.dx_l).max(0.0) } else { f64::INFINITY };
    let step = take_step(run, &d, l, alpha_star);
    Ok((step, d))
}

/// Step with unit change in the freed variable on the current basis.
pub(crate) fn intermediate_step(run: &mut Run, l: usize) -> Result<(StepResult, Direction), SolveError> {
    let p = run.p;
    let sigma = run.part.side[l].sign();
    let basis = run.part.basic.clone();
    let f = run.factor(&basis)?;
    let d = base_direction(p, f, l, sigma);
    let v = run.it.x[l] - target(run, l);
    let alpha_star = (-sigma * v).max(0.0);
    let step = take_step(run, &d, l, alpha_star);
    Ok((step, d))
}

/// Most violated index with the side it must reach.
fn eligible(run: &Run) -> Option<(usize, Side)> {
    let eps = run.limits.eps_fea;
    let mut cands = Vec::new();
    for &j in &run.part.basic {
        let x = run.it.x[j];
        let lo = run.p.lower_shifted(run.s, j);
        let hi = run.p.upper_shifted(run.s, j);
        if x < lo - eps {
            cands.push((j, x - lo, Side::Lower));
        } else if x > hi + eps {
            cands.push((j, hi - x, Side::Upper));
        }
    }
    let mut pinched_cands = Vec::new();
    for &j in &run.part.nonbasic {
        let side = run.part.side[j];
        if side == Side::Temporary {
            continue;
        }
        // coincident bounds: the side only tracks the dual sign
        let pinched = run.p.pinched(run.s, j);
        let x = run.it.x[j];
        let lo = run.p.lower_shifted(run.s, j);
        let hi = run.p.upper_shifted(run.s, j);
        let list = if pinched { &mut pinched_cands } else { &mut cands };
        if (side == Side::Lower || pinched) && x < lo - eps {
            list.push((j, x - lo, Side::Lower));
        } else if (side == Side::Upper || pinched) && x > hi + eps {
            list.push((j, hi - x, Side::Upper));
        }
    }
    // a ray is no certificate while a relaxed equality is still off its value
    if !pinched_cands.is_empty() {
        return select(&pinched_cands, run.least_index).map(|c| (c.0, c.2));
    }
    select(&cands, run.least_index).map(|c| (c.0, c.2))
}

fn step_guard(run: &Run, l: usize) -> Result<(), SolveError> {
    if run.part.freed != Some(l) {
        return Err(SolveError::InvalidStart(format!("index {l} is not the freed index")));
    }
    if run.part.side[l] == Side::Temporary {
        return Err(SolveError::InvalidStart(format!("index {l} has no bound to reach")));
    }
    let v = run.it.x[l] - target(run, l);
    if run.part.side[l].sign() * v >= 0.0 {
        return Err(SolveError::InvalidStart(format!("index {l} does not violate its bound")));
    }
    Ok(())
}

fn with_run<T>(
    p: &QpProblem,
    s: &Shifts,
    part: &mut Partition,
    it: &mut Iterate,
    f: impl FnOnce(&mut Run) -> Result<T, SolveError>,
) -> Result<T, SolveError> {
    let limits = Limits::default();
    let mut sink = NullSink;
    let mut run = Run::new(p, s, (it.clone(), part.clone()), &limits, &mut sink, Method::Dual, 0)?;
    let out = f(&mut run)?;
    *it = run.it;
    *part = run.part;
    Ok(out)
}

/// One base subiteration for the freed index `l`; `part.side[l]` names the
/// bound `l` must reach. An infinite step leaves the state untouched and
/// signals primal infeasibility.
pub fn dual_base(
    p: &QpProblem,
    s: &Shifts,
    part: &mut Partition,
    it: &mut Iterate,
    l: usize,
) -> Result<StepOutcome, SolveError> {
    with_run(p, s, part, it, |run| {
        step_guard(run, l)?;
        let (step, direction) = base_step(run, l)?;
        Ok(StepOutcome { step, direction })
    })
}

/// One intermediate subiteration for the freed index `l`.
pub fn dual_intermediate(
    p: &QpProblem,
    s: &Shifts,
    part: &mut Partition,
    it: &mut Iterate,
    l: usize,
) -> Result<StepOutcome, SolveError> {
    with_run(p, s, part, it, |run| {
        step_guard(run, l)?;
        let (step, direction) = intermediate_step(run, l)?;
        Ok(StepOutcome { step, direction })
    })
}

/// Solve the shifted dual problem from a (possibly relaxed) start.
pub fn solve_dual(
    p: &QpProblem,
    s: &Shifts,
    start: (Iterate, Partition),
    limits: &Limits,
    sink: &mut dyn TraceSink,
) -> Result<DualOutcome, SolveError> {
    solve_dual_stage(p, s, start, limits, sink, 0)
}

pub(crate) fn solve_dual_stage(
    p: &QpProblem,
    s: &Shifts,
    start: (Iterate, Partition),
    limits: &Limits,
    sink: &mut dyn TraceSink,
    stage: usize,
) -> Result<DualOutcome, SolveError> {
    if start.1.freed.is_some() {
        return Err(SolveError::InvalidStart("start partition has a freed index".into()));
    }
    let mut run = Run::new(p, s, start, limits, sink, Method::Dual, stage)?;
    let finish = |run: Run, status, certificate| DualOutcome {
        status,
        iterations: run.iterations,
        subiterations: run.subiterations,
        iterate: run.it,
        partition: run.part,
        certificate,
    };
    loop {
        run.boundary()?;
        let Some((l, side)) = eligible(&run) else {
            return Ok(finish(run, DualStatus::Optimal, None));
        };
        if run.iterations >= limits.max_iter {
            return Ok(finish(run, DualStatus::IterationLimit, None));
        }
        run.iterations += 1;
        if run.part.remove_basic(l) {
            run.part.freed = Some(l);
            run.part.side[l] = side;
            let (step, d) = base_step(&mut run, l)?;
            if step.is_unbounded() {
                run.part.freed = None;
                run.part.add_basic(l);
                return Ok(finish(run, DualStatus::PrimalInfeasible, Some(d)));
            }
        } else {
            run.part.remove_nonbasic(l);
            run.part.freed = Some(l);
            run.part.side[l] = side;
        }
        while run.part.freed.is_some() {
            intermediate_step(&mut run, l)?;
        }
    }
}
