//! State and step machinery shared by the primal and dual methods.

use crate::kkt::{factor_basis, refresh_iterate, KktFactorization, SingularReport};
use crate::model::{
    dual_objective, primal_objective, residuals, Direction, Iterate, Partition, QpProblem, Shifts, Side,
};
use crate::trace::{BoundaryRecord, Method, StepRecord, TraceEvent, TraceSink};
use thiserror::Error;

/// Direction entries below this multiple of the direction's size are zero.
pub const DIRECTION_TOL: f64 = 1e-11;

/// Termination and budget settings for one method run.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub max_iter: usize,
    pub eps_fea: f64,
    pub eps_opt: f64,
    /// Consecutive zero steps tolerated before switching to least-index
    /// selection.
    pub cycling_window: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_iter: 10_000, eps_fea: 1e-6, eps_opt: 1e-6, cycling_window: 50 }
    }
}

/// Outcome of one ratio test and step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub alpha: f64,
    pub alpha_star: f64,
    pub alpha_max: f64,
    pub blocking: Option<usize>,
    pub hit_target: bool,
}

impl StepResult {
    pub(crate) fn new(alpha_star: f64, alpha_max: f64, blocking: Option<usize>) -> Self {
        let hit_target = alpha_star <= alpha_max;
        let alpha = alpha_star.min(alpha_max);
        Self { alpha, alpha_star, alpha_max, blocking: if hit_target { None } else { blocking }, hit_target }
    }

    pub fn is_unbounded(&self) -> bool {
        self.alpha.is_infinite()
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    /// A basis that theory guarantees nonsingular failed to factor.
    #[error("internal invariant violated: {0}")]
    Singular(#[from] SingularReport),
    #[error("invalid starting point: {0}")]
    InvalidStart(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

fn cached<'c>(
    cache: &'c mut Option<KktFactorization>,
    p: &QpProblem,
    basis: &[usize],
) -> Result<&'c KktFactorization, SingularReport> {
    let hit = matches!(cache, Some(f) if f.basis() == basis);
    if !hit {
        *cache = Some(factor_basis(p, basis)?);
    }
    Ok(cache.as_ref().unwrap())
}

pub(crate) struct Run<'a> {
    pub p: &'a QpProblem,
    pub s: &'a Shifts,
    pub part: Partition,
    pub it: Iterate,
    pub limits: &'a Limits,
    pub sink: &'a mut dyn TraceSink,
    pub method: Method,
    pub stage: usize,
    pub iterations: usize,
    pub subiterations: usize,
    zero_steps: usize,
    pub least_index: bool,
    cache: Option<KktFactorization>,
}

impl<'a> Run<'a> {
    pub fn new(
        p: &'a QpProblem,
        s: &'a Shifts,
        start: (Iterate, Partition),
        limits: &'a Limits,
        sink: &'a mut dyn TraceSink,
        method: Method,
        stage: usize,
    ) -> Result<Self, SolveError> {
        let (it, part) = start;
        let n = p.nvars();
        if it.x.len() != n || it.z.len() != n || it.y.len() != p.ncons() || part.nvars() != n {
            return Err(SolveError::InvalidStart("dimension mismatch".into()));
        }
        if !part.is_consistent() {
            return Err(SolveError::InvalidStart("partition must cover every index exactly once".into()));
        }
        if s.q.len() != n || s.q_upper.len() != n || s.r.len() != n {
            return Err(SolveError::InvalidStart("shift dimension mismatch".into()));
        }
        Ok(Self {
            p,
            s,
            part,
            it,
            limits,
            sink,
            method,
            stage,
            iterations: 0,
            subiterations: 0,
            zero_steps: 0,
            least_index: false,
            cache: None,
        })
    }

    /// Factor of `K` for `basis`, reusing the previous one when unchanged.
    pub fn factor(&mut self, basis: &[usize]) -> Result<&KktFactorization, SingularReport> {
        cached(&mut self.cache, self.p, basis)
    }

    /// Factor the current basis, recompute the dependent parts of the
    /// iterate and report the boundary.
    pub fn boundary(&mut self) -> Result<(), SolveError> {
        let p = self.p;
        let basis = self.part.basic.clone();
        let res = cached(&mut self.cache, p, &basis);
        if self.sink.enabled() {
            self.sink.event(TraceEvent::Boundary(BoundaryRecord {
                stage: self.stage,
                method: self.method,
                iteration: self.iterations,
                basis,
                factored: res.is_ok(),
            }));
        }
        match res {
            Ok(f) => refresh_iterate(p, f, &mut self.it),
            Err(e) => return Err(e.clone().into()),
        }
        self.settle_pinched();
        Ok(())
    }

    /// Nonbasic variables with coincident bounds take the side matching the
    /// sign of their dual.
    pub fn settle_pinched(&mut self) {
        for &j in &self.part.nonbasic {
            if self.part.side[j] != Side::Temporary && self.p.pinched(self.s, j) {
                let w = self.it.z[j] + self.s.r[j];
                self.part.side[j] = if w >= 0.0 { Side::Lower } else { Side::Upper };
            }
        }
    }

    pub fn dual_tol(&self) -> f64 {
        self.limits.eps_opt * self.it.y.amax().max(1.0)
    }

    pub fn bound(&self, j: usize, side: Side) -> f64 {
        self.p.bound_value(self.s, j, side)
    }

    fn direction_scale(d: &Direction) -> f64 {
        d.dx.amax().max(d.dy.amax()).max(1.0)
    }

    pub fn zero_threshold(d: &Direction) -> f64 {
        DIRECTION_TOL * Self::direction_scale(d)
    }

    /// Largest step keeping basic variables (and the freed one) inside their
    /// shifted bounds. Slightly violated bounds count as active.
    pub fn primal_ratio(&self, d: &Direction, l: usize) -> (f64, Option<(usize, Side)>) {
        let thr = DIRECTION_TOL * d.dx.amax().max(1.0);
        let mut best = f64::INFINITY;
        let mut who = None;
        let mut movers = self.part.basic.clone();
        if let Err(pos) = movers.binary_search(&l) {
            movers.insert(pos, l);
        }
        for &i in &movers {
            let dx = d.dx[i];
            let x = self.it.x[i];
            if dx < -thr {
                let lo = self.p.lower_shifted(self.s, i);
                if lo.is_finite() {
                    let ratio = (x - lo).max(0.0) / -dx;
                    if ratio < best {
                        best = ratio;
                        who = Some((i, Side::Lower));
                    }
                }
            } else if dx > thr {
                let hi = self.p.upper_shifted(self.s, i);
                if hi.is_finite() {
                    let ratio = (hi - x).max(0.0) / dx;
                    if ratio < best {
                        best = ratio;
                        who = Some((i, Side::Upper));
                    }
                }
            }
        }
        (best, who)
    }

    /// Largest step keeping nonbasic duals on the correct side of their
    /// shifted bounds. Temporary and pinched variables do not block.
    pub fn dual_ratio(&self, d: &Direction) -> (f64, Option<usize>) {
        let thr = DIRECTION_TOL * d.dz.amax().max(1.0);
        let mut best = f64::INFINITY;
        let mut who = None;
        for &i in &self.part.nonbasic {
            let side = self.part.side[i];
            if side == Side::Temporary || self.p.pinched(self.s, i) {
                continue;
            }
            let sg = side.sign();
            let dw = sg * d.dz[i];
            if dw < -thr {
                let w = sg * (self.it.z[i] + self.s.r[i]);
                let ratio = w.max(0.0) / -dw;
                if ratio < best {
                    best = ratio;
                    who = Some(i);
                }
            }
        }
        (best, who)
    }

    pub fn apply(&mut self, d: &Direction, alpha: f64) {
        if alpha == 0.0 {
            return;
        }
        self.it.x.axpy(alpha, &d.dx, 1.0);
        self.it.y.axpy(alpha, &d.dy, 1.0);
        self.it.z.axpy(alpha, &d.dz, 1.0);
    }

    pub fn note_step(&mut self, alpha: f64) {
        self.subiterations += 1;
        if alpha == 0.0 {
            self.zero_steps += 1;
            if self.zero_steps >= self.limits.cycling_window {
                self.least_index = true;
            }
        } else {
            self.zero_steps = 0;
            self.least_index = false;
        }
    }

    /// Shifts for which the current point is stationary: relaxed basic duals
    /// (primal method) or relaxed nonbasic variables (dual method) get the
    /// shift that makes them exact.
    pub fn effective_shifts(&self) -> Shifts {
        let mut s = self.s.clone();
        match self.method {
            Method::Primal => {
                for &i in &self.part.basic {
                    if self.it.z[i] + s.r[i] != 0.0 {
                        s.r[i] = -self.it.z[i];
                    }
                }
            }
            Method::Dual => {
                for &i in &self.part.nonbasic {
                    let x = self.it.x[i];
                    if self.p.pinched(self.s, i) {
                        if x != self.bound(i, Side::Lower) {
                            s.q[i] = self.p.lower()[i] - x;
                            s.q_upper[i] = x - self.p.upper()[i];
                        }
                        continue;
                    }
                    match self.part.side[i] {
                        Side::Lower if x != self.bound(i, Side::Lower) => s.q[i] = self.p.lower()[i] - x,
                        Side::Upper if x != self.bound(i, Side::Upper) => s.q_upper[i] = x - self.p.upper()[i],
                        _ => {}
                    }
                }
            }
        }
        s
    }

    pub fn tracked_objective(&self, s: &Shifts) -> f64 {
        match self.method {
            Method::Primal => primal_objective(self.p, s, &self.it),
            Method::Dual => dual_objective(self.p, s, &self.it),
        }
    }

    /// Emit a step record. `before` holds the objective under `eff` taken
    /// before the step.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        d: &Direction,
        step: &StepResult,
        violation: f64,
        eff: &Shifts,
        before: f64,
        basic: Vec<usize>,
        nonbasic: Vec<usize>,
        temporary_swap: bool,
    ) {
        if !self.sink.enabled() {
            return;
        }
        let after = if step.alpha.is_finite() { self.tracked_objective(eff) } else { before };
        let (stat, eq) = residuals(self.p, &self.it);
        let rec = StepRecord {
            stage: self.stage,
            method: self.method,
            iteration: self.iterations,
            subiteration: self.subiterations,
            kind: d.kind,
            freed: d.freed,
            blocking: step.blocking,
            alpha: step.alpha,
            alpha_star: step.alpha_star,
            alpha_max: step.alpha_max,
            dx_l: d.dx_l,
            dz_l: d.dz_l,
            violation,
            objective_before: before,
            objective_after: after,
            stationarity_residual: stat.amax(),
            equality_residual: eq.amax(),
            basic,
            nonbasic,
            direction: d.clone(),
            temporary_swap,
        };
        self.sink.event(TraceEvent::Step(Box::new(rec)));
    }

    /// Objective snapshot for a step about to be taken, skipped when nobody
    /// listens.
    pub fn snapshot(&self) -> (Shifts, f64) {
        if !self.sink.enabled() {
            return (self.s.clone(), 0.0);
        }
        let eff = self.effective_shifts();
        let f = self.tracked_objective(&eff);
        (eff, f)
    }
}

/// Pick the candidate with the most negative score, ties to the least index;
/// in least-index mode just the least index.
pub(crate) fn select<T: Copy>(cands: &[(usize, f64, T)], least_index: bool) -> Option<(usize, f64, T)> {
    let mut best: Option<(usize, f64, T)> = None;
    for &c in cands {
        best = match best {
            None => Some(c),
            Some(b) => {
                let better = if least_index { c.0 < b.0 } else { c.1 < b.1 || (c.1 == b.1 && c.0 < b.0) };
                if better {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}
