//! Per-problem result rows and expected-status files.

use crate::driver::SolveStatus;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

/// Column order is fixed: `name,n,m,status,objective,strategy,stage1_iters,stage2_iters,subiters,millis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// A status name, or `error` when the problem could not be solved.
    pub status: String,
    /// Empty unless the status is `optimal`.
    pub objective: Option<f64>,
    pub strategy: String,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub subiters: usize,
    pub millis: f64,
}

pub const ERROR_STATUS: &str = "error";

impl RunRow {
    pub fn total_iterations(&self) -> usize {
        self.stage1_iters + self.stage2_iters
    }

    /// Terminated with one of the three definite answers.
    pub fn solved(&self) -> bool {
        matches!(
            SolveStatus::from_str(&self.status),
            Ok(SolveStatus::Optimal | SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible)
        )
    }
}

pub fn write_runlog<W: Write>(out: W, rows: &[RunRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "name",
            "n",
            "m",
            "status",
            "objective",
            "strategy",
            "stage1_iters",
            "stage2_iters",
            "subiters",
            "millis",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runlog<R: Read>(input: R) -> Result<Vec<RunRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// `name status` per line, `#` comments.
pub fn parse_expectations(text: &str) -> Result<BTreeMap<String, SolveStatus>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            [name, status] => {
                let s = SolveStatus::from_str(status).map_err(|e| format!("line {}: {e}", i + 1))?;
                if out.insert((*name).to_owned(), s).is_some() {
                    return Err(format!("line {}: duplicate entry for `{name}`", i + 1));
                }
            }
            _ => return Err(format!("line {}: expected `name status`", i + 1)),
        }
    }
    Ok(out)
}
