//! Performance profiles and per-problem outperforming factors from two run
//! logs, measured in total iterations.
//!
//! A solver's cost on a problem is `max(1, iterations)` when it terminated
//! with a definite answer and infinite otherwise. The profile of solver `s`
//! is the fraction of problems whose ratio `cost_s / min cost` is at most
//! `τ`; the factor of a problem is `log2(cost_A / cost_B)`.

use super::runlog::RunRow;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStep {
    pub solver: String,
    pub tau: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    None,
    A,
    B,
    Both,
}

impl Failure {
    pub fn name(self) -> &'static str {
        match self {
            Failure::None => "",
            Failure::A => "A",
            Failure::B => "B",
            Failure::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorBar {
    pub problem: String,
    /// `+inf` when only A failed, `-inf` when only B failed, NaN when both did.
    pub factor: f64,
    pub failure: Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileData {
    pub steps: Vec<ProfileStep>,
    pub factors: Vec<FactorBar>,
}

fn cost(r: &RunRow) -> f64 {
    if r.solved() {
        r.total_iterations().max(1) as f64
    } else {
        f64::INFINITY
    }
}

fn steps_for(solver: &str, ratios: &[f64]) -> Vec<ProfileStep> {
    let total = ratios.len() as f64;
    let mut finite: Vec<f64> = ratios.iter().copied().filter(|r| r.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let mut out: Vec<ProfileStep> = Vec::new();
    for (k, &tau) in finite.iter().enumerate() {
        let fraction = (k + 1) as f64 / total;
        match out.last_mut() {
            Some(last) if last.tau == tau => last.fraction = fraction,
            _ => out.push(ProfileStep { solver: solver.to_owned(), tau, fraction }),
        }
    }
    out
}

/// Profiles for logs `a` and `b` labelled `labels`. Problems are matched by
/// name and reported in `a`'s order.
pub fn profile(a: &[RunRow], b: &[RunRow], labels: (&str, &str)) -> Result<ProfileData, String> {
    let by_name: BTreeMap<&str, &RunRow> = b.iter().map(|r| (r.name.as_str(), r)).collect();
    if by_name.len() != b.len() {
        return Err("second log repeats a problem name".into());
    }
    let names_a: BTreeMap<&str, ()> = a.iter().map(|r| (r.name.as_str(), ())).collect();
    if names_a.len() != a.len() {
        return Err("first log repeats a problem name".into());
    }
    if !names_a.keys().eq(by_name.keys()) {
        let only_a: Vec<&str> = names_a.keys().filter(|k| !by_name.contains_key(*k)).copied().collect();
        let only_b: Vec<&str> = by_name.keys().filter(|k| !names_a.contains_key(*k)).copied().collect();
        return Err(format!("problem sets differ: only in first {only_a:?}, only in second {only_b:?}"));
    }
    let mut ra = Vec::with_capacity(a.len());
    let mut rb = Vec::with_capacity(a.len());
    let mut factors = Vec::with_capacity(a.len());
    for row_a in a {
        let row_b = by_name[row_a.name.as_str()];
        let (ca, cb) = (cost(row_a), cost(row_b));
        let best = ca.min(cb);
        ra.push(ca / best);
        rb.push(cb / best);
        let failure = match (ca.is_finite(), cb.is_finite()) {
            (true, true) => Failure::None,
            (false, true) => Failure::A,
            (true, false) => Failure::B,
            (false, false) => Failure::Both,
        };
        let factor = match failure {
            Failure::None => (ca / cb).log2(),
            Failure::A => f64::INFINITY,
            Failure::B => f64::NEG_INFINITY,
            Failure::Both => f64::NAN,
        };
        factors.push(FactorBar { problem: row_a.name.clone(), factor, failure });
    }
    let mut steps = steps_for(labels.0, &ra);
    steps.extend(steps_for(labels.1, &rb));
    Ok(ProfileData { steps, factors })
}
