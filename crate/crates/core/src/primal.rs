//! Primal active-set method.
//!
//! Keeps the primal bounds satisfied and drives dual violations to zero one
//! index at a time. A freed index first takes a step with unit change in the
//! variable itself; if a basic variable blocks, further steps use unit change
//! in the dual until the freed dual reaches its target.
//!
//! Relaxed starts are accepted: basic variables whose dual is not at its
//! target are eligible for selection.

use crate::engine::{select, Limits, Run, SolveError, StepResult};
use crate::kkt::{base_direction, intermediate_direction};
use crate::model::{Direction, Iterate, Partition, QpProblem, Shifts, Side};
use crate::trace::{Method, NullSink, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalStatus {
    Optimal,
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct PrimalOutcome {
    pub status: PrimalStatus,
    pub iterate: Iterate,
    pub partition: Partition,
    pub iterations: usize,
    pub subiterations: usize,
    /// Direction along which the primal objective decreases without bound.
    pub certificate: Option<Direction>,
}

/// A single subiteration taken through the public step functions.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: StepResult,
    pub direction: Direction,
}

fn orientation(v: f64) -> f64 {
    if v < 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn violation(run: &Run, l: usize) -> f64 {
    run.it.z[l] + run.s.r[l]
}

/// Apply the partition change that ends a subiteration.
fn settle(run: &mut Run, l: usize, step: &StepResult, who: Option<(usize, Side)>) {
    if step.hit_target {
        run.it.z[l] = -run.s.r[l];
        run.part.add_basic(l);
        run.part.freed = None;
    } else if let Some((k, side)) = who {
        run.it.x[k] = run.bound(k, side);
        if k == l {
            run.part.add_nonbasic(l, side);
            run.part.freed = None;
        } else {
            run.part.remove_basic(k);
            run.part.add_nonbasic(k, side);
        }
    }
}

fn take_step(run: &mut Run, d: &Direction, l: usize, alpha_star: f64, v: f64) -> StepResult {
    let (eff, before) = run.snapshot();
    let (alpha_max, who) = run.primal_ratio(d, l);
    let step = StepResult::new(alpha_star, alpha_max, who.map(|w| w.0));
    if step.is_unbounded() {
        // the certificate direction still counts as a subiteration
        run.subiterations += 1;
        return step;
    }
    let basic = run.part.basic.clone();
    let nonbasic = run.part.nonbasic.clone();
    run.apply(d, step.alpha);
    run.note_step(step.alpha);
    run.record(d, &step, v, &eff, before, basic, nonbasic, false);
    settle(run, l, &step, who);
    step
}

/// Step with unit change in the freed variable, from the factor of the
/// current basis. `l` must already be freed.
pub(crate) fn base_step(run: &mut Run, l: usize, sigma: f64) -> Result<(StepResult, Direction), SolveError> {
    let p = run.p;
    let basis = run.part.basic.clone();
    let f = run.factor(&basis)?;
    let d = base_direction(p, f, l, sigma);
    let v = violation(run, l);
    let thr = Run::zero_threshold(&d);
    let alpha_star = if sigma * d.dz_l > thr { (-v / d.dz_l).max(0.0) } else { f64::INFINITY };
    let step = take_step(run, &d, l, alpha_star, v);
    Ok((step, d))
}

/// Step with unit change in the freed dual, from the factor of the basis
/// bordered by `l`.
pub(crate) fn intermediate_step(run: &mut Run, l: usize, sigma: f64) -> Result<(StepResult, Direction), SolveError> {
    let p = run.p;
    let bordered = run.part.basic_with(l);
    let f = run.factor(&bordered)?;
    let d = intermediate_direction(p, f, l, sigma);
    let v = violation(run, l);
    let alpha_star = (-sigma * v).max(0.0);
    let step = take_step(run, &d, l, alpha_star, v);
    Ok((step, d))
}

fn eligible(run: &Run) -> Option<usize> {
    let tol = run.dual_tol();
    let mut cands = Vec::new();
    for &j in &run.part.nonbasic {
        let w = violation(run, j);
        match run.part.side[j] {
            Side::Temporary => {
                if w.abs() > tol {
                    cands.push((j, -w.abs(), ()));
                }
            }
            side => {
                if !run.p.pinched(run.s, j) {
                    let ow = side.sign() * w;
                    if ow < -tol {
                        cands.push((j, ow, ()));
                    }
                }
            }
        }
    }
    for &j in &run.part.basic {
        let w = violation(run, j);
        if w.abs() > tol {
            cands.push((j, -w.abs(), ()));
        }
    }
    select(&cands, run.least_index).map(|c| c.0)
}

fn step_guard(run: &Run, l: usize) -> Result<f64, SolveError> {
    if run.part.freed != Some(l) {
        return Err(SolveError::InvalidStart(format!("index {l} is not the freed index")));
    }
    let v = violation(run, l);
    if v == 0.0 {
        return Err(SolveError::InvalidStart(format!("dual of index {l} is already at its target")));
    }
    Ok(orientation(v))
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
    let mut run = Run::new(p, s, (it.clone(), part.clone()), &limits, &mut sink, Method::Primal, 0)?;
    let out = f(&mut run)?;
    *it = run.it;
    *part = run.part;
    Ok(out)
}

/// One base subiteration for the freed index `l` (set `part.freed` first).
/// An infinite step leaves the state untouched and signals an unbounded
/// primal objective.
pub fn primal_base(
    p: &QpProblem,
    s: &Shifts,
    part: &mut Partition,
    it: &mut Iterate,
    l: usize,
) -> Result<StepOutcome, SolveError> {
    with_run(p, s, part, it, |run| {
        let sigma = step_guard(run, l)?;
        let (step, direction) = base_step(run, l, sigma)?;
        Ok(StepOutcome { step, direction })
    })
}

/// One intermediate subiteration for the freed index `l`.
pub fn primal_intermediate(
    p: &QpProblem,
    s: &Shifts,
    part: &mut Partition,
    it: &mut Iterate,
    l: usize,
) -> Result<StepOutcome, SolveError> {
    with_run(p, s, part, it, |run| {
        let sigma = step_guard(run, l)?;
        let (step, direction) = intermediate_step(run, l, sigma)?;
        Ok(StepOutcome { step, direction })
    })
}

/// Solve the shifted primal problem from a (possibly relaxed) start.
pub fn solve_primal(
    p: &QpProblem,
    s: &Shifts,
    start: (Iterate, Partition),
    limits: &Limits,
    sink: &mut dyn TraceSink,
) -> Result<PrimalOutcome, SolveError> {
    solve_primal_stage(p, s, start, limits, sink, 0)
}

pub(crate) fn solve_primal_stage(
    p: &QpProblem,
    s: &Shifts,
    start: (Iterate, Partition),
    limits: &Limits,
    sink: &mut dyn TraceSink,
    stage: usize,
) -> Result<PrimalOutcome, SolveError> {
    if start.1.freed.is_some() {
        return Err(SolveError::InvalidStart("start partition has a freed index".into()));
    }
    let mut run = Run::new(p, s, start, limits, sink, Method::Primal, stage)?;
    let finish = |run: Run, status, certificate| PrimalOutcome {
        status,
        iterations: run.iterations,
        subiterations: run.subiterations,
        iterate: run.it,
        partition: run.part,
        certificate,
    };
    loop {
        run.boundary()?;
        let Some(l) = eligible(&run) else {
            return Ok(finish(run, PrimalStatus::Optimal, None));
        };
        if run.iterations >= limits.max_iter {
            return Ok(finish(run, PrimalStatus::IterationLimit, None));
        }
        run.iterations += 1;
        let sigma = orientation(violation(&run, l));
        if run.part.remove_basic(l) {
            run.part.freed = Some(l);
        } else {
            let side = run.part.side[l];
            run.part.remove_nonbasic(l);
            run.part.freed = Some(l);
            let (step, d) = base_step(&mut run, l, sigma)?;
            if step.is_unbounded() {
                run.part.freed = None;
                run.part.add_nonbasic(l, side);
                return Ok(finish(run, PrimalStatus::DualInfeasible, Some(d)));
            }
        }
        while run.part.freed.is_some() {
            intermediate_step(&mut run, l, sigma)?;
        }
    }
}
