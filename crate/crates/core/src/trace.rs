//! Per-subiteration trace records and sinks.

use crate::model::{Direction, DirectionKind, Shifts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Primal,
    Dual,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Primal => "primal",
            Method::Dual => "dual",
        }
    }
}

/// One subiteration. `violation` is `z_l + r_l` for the primal method and
/// `x_l − bound_l` for the dual method, both taken before the step;
/// `objective_*` is the primal objective (primal method) or the dual
/// objective (dual method) under the shifts for which the starting point is
/// stationary.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub stage: usize,
    pub method: Method,
    pub iteration: usize,
    pub subiteration: usize,
    pub kind: DirectionKind,
    pub freed: usize,
    pub blocking: Option<usize>,
    pub alpha: f64,
    pub alpha_star: f64,
    pub alpha_max: f64,
    pub dx_l: f64,
    pub dz_l: f64,
    pub violation: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    pub stationarity_residual: f64,
    pub equality_residual: f64,
    /// Basic set the direction was computed for (without the freed index).
    pub basic: Vec<usize>,
    pub nonbasic: Vec<usize>,
    pub direction: Direction,
    /// Zero step forced by a temporary bound whose dual would have moved.
    pub temporary_swap: bool,
}

/// Start of an iteration: the basis was factored (or failed to factor).
#[derive(Debug, Clone)]
pub struct BoundaryRecord {
    pub stage: usize,
    pub method: Method,
    pub iteration: usize,
    pub basis: Vec<usize>,
    pub factored: bool,
}

/// Stage summary emitted by the driver.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub stage: usize,
    pub method: Method,
    pub status: String,
    pub iterations: usize,
    pub subiterations: usize,
    pub shifts: Shifts,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Expected `f_P − f_D` at an optimum of the shifted pair.
    pub gap_target: f64,
    pub optimal: bool,
}

#[derive(Debug, Clone)]
pub enum TraceEvent {
    Boundary(BoundaryRecord),
    Step(Box<StepRecord>),
    Stage(StageRecord),
}

pub trait TraceSink {
    fn event(&mut self, e: TraceEvent);
    /// Sinks that discard everything let the solver skip building records.
    fn enabled(&self) -> bool {
        true
    }
}

/// Discards all events.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn event(&mut self, _e: TraceEvent) {}
    fn enabled(&self) -> bool {
        false
    }
}

/// Keeps every event in memory.
#[derive(Debug, Default, Clone)]
pub struct VecSink {
    pub events: Vec<TraceEvent>,
}

impl TraceSink for VecSink {
    fn event(&mut self, e: TraceEvent) {
        self.events.push(e);
    }
}

impl VecSink {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Step(s) => Some(s.as_ref()),
            _ => None,
        })
    }

    pub fn boundaries(&self) -> impl Iterator<Item = &BoundaryRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Boundary(b) => Some(b),
            _ => None,
        })
    }

    pub fn stages(&self) -> impl Iterator<Item = &StageRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Stage(s) => Some(s),
            _ => None,
        })
    }
}
