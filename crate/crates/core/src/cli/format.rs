//! Plain-text problem files, version `QPT 1`.
//!
//! ```text
//! file     := "QPT" "1" section* ["end"]
//! section  := "name" TOKEN
//!           | "dims" N M
//!           | "hessian" block            (N x N)
//!           | "constraints" block        (M x N)
//!           | "cost" values              (N numbers)
//!           | "lower" values             (N + M bounds)
//!           | "upper" values             (N + M bounds)
//! block    := "dense" values             (row-major)
//!           | "triplets" K  (I J V){K}   (one triplet per line, 1-based)
//! ```
//!
//! Tokens are separated by whitespace and `#` starts a comment. Every
//! section keyword begins a line and its values run on the following lines;
//! a values line holds nothing but values. `dims` comes before any sized
//! section; `name` is optional, everything else is required. Bounds take
//! `inf` / `-inf`. Hessian triplets may come from either triangle or both:
//! each entry also fills its mirror and repeated positions must agree.
//! The first `lower`/`upper` entries bound the variables, the rest bound
//! the constraint rows.

use crate::driver::GeneralQp;
use crate::model::{Matrix, Vector};
use std::fmt::Write as _;
use thiserror::Error;

pub const HEADER: &str = "QPT 1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based; 0 when the problem is with the file as a whole.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// A parsed problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub name: Option<String>,
    pub problem: GeneralQp,
}

struct Line {
    no: usize,
    tokens: Vec<String>,
}

struct Cursor {
    lines: Vec<Line>,
    pos: usize,
}

const KEYWORDS: [&str; 8] = ["name", "dims", "hessian", "constraints", "cost", "lower", "upper", "end"];

impl Cursor {
    fn new(text: &str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let body = raw.split('#').next().unwrap_or("");
                let tokens: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
                (!tokens.is_empty()).then_some(Line { no: i + 1, tokens })
            })
            .collect();
        Cursor { lines, pos: 0 }
    }

    fn next_line(&mut self) -> Option<&Line> {
        let l = self.lines.get(self.pos);
        self.pos += 1;
        l
    }

    fn last_line_no(&self) -> usize {
        self.lines.last().map_or(0, |l| l.no)
    }

    /// Gather exactly `count` values from whole lines.
    fn values(&mut self, what: &str, count: usize, allow_inf: bool) -> Result<Vec<f64>, ParseError> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let Some(line) = self.lines.get(self.pos) else {
                return err(self.last_line_no(), format!("{what}: expected {count} values, found {}", out.len()));
            };
            if KEYWORDS.contains(&line.tokens[0].as_str()) {
                return err(line.no, format!("{what}: expected {count} values, found {}", out.len()));
            }
            if out.len() + line.tokens.len() > count {
                return err(line.no, format!("{what}: more than {count} values"));
            }
            for t in &line.tokens {
                out.push(number(t, line.no, allow_inf)?);
            }
            self.pos += 1;
        }
        Ok(out)
    }
}

fn number(tok: &str, line: usize, allow_inf: bool) -> Result<f64, ParseError> {
    let v: f64 = match tok.parse() {
        Ok(v) => v,
        Err(_) => return err(line, format!("`{tok}` is not a number")),
    };
    if v.is_nan() {
        return err(line, "NaN is not allowed");
    }
    if v.is_infinite() && !allow_inf {
        return err(line, format!("`{tok}`: infinite values are only allowed in bounds"));
    }
    Ok(v)
}

fn count(tok: &str, line: usize) -> Result<usize, ParseError> {
    tok.parse().or_else(|_| err(line, format!("`{tok}` is not a non-negative integer")))
}

fn expect_args(line: &Line, n: usize) -> Result<(), ParseError> {
    if line.tokens.len() != n + 1 {
        return err(line.no, format!("`{}` takes {n} argument(s), found {}", line.tokens[0], line.tokens.len() - 1));
    }
    Ok(())
}

/// Reads a dense or triplet block. With `symmetric`, each triplet also sets
/// its mirror.
fn block(
    cur: &mut Cursor,
    head: &Line,
    what: &str,
    rows: usize,
    cols: usize,
    symmetric: bool,
) -> Result<Matrix, ParseError> {
    let kind = head.tokens.get(1).map(String::as_str);
    match kind {
        Some("dense") => {
            expect_args(head, 1)?;
            let v = cur.values(what, rows * cols, false)?;
            let m = Matrix::from_row_slice(rows, cols, &v);
            if symmetric {
                for i in 0..rows {
                    for j in 0..i {
                        if m[(i, j)] != m[(j, i)] {
                            return err(head.no, format!("{what} is not symmetric at ({}, {})", i + 1, j + 1));
                        }
                    }
                }
            }
            Ok(m)
        }
        Some("triplets") => {
            expect_args(head, 2)?;
            let k = count(&head.tokens[2], head.no)?;
            let mut m = Matrix::zeros(rows, cols);
            let mut set = vec![false; rows * cols];
            for t in 0..k {
                let Some(line) = cur.next_line() else {
                    return err(head.no, format!("{what}: expected {k} triplets, found {t}"));
                };
                if line.tokens.len() != 3 || KEYWORDS.contains(&line.tokens[0].as_str()) {
                    return err(line.no, format!("{what}: malformed triplet row, expected `I J V`"));
                }
                let i = count(&line.tokens[0], line.no)?;
                let j = count(&line.tokens[1], line.no)?;
                if i == 0 || i > rows || j == 0 || j > cols {
                    return err(line.no, format!("{what}: index ({i}, {j}) outside {rows} x {cols}"));
                }
                let v = number(&line.tokens[2], line.no, false)?;
                let (i, j) = (i - 1, j - 1);
                let mut targets = vec![(i, j)];
                if symmetric && i != j {
                    targets.push((j, i));
                }
                for (a, b) in targets {
                    let slot = a * cols + b;
                    if set[slot] && m[(a, b)] != v {
                        return err(line.no, format!("{what}: conflicting duplicate entry at ({}, {})", i + 1, j + 1));
                    }
                    set[slot] = true;
                    m[(a, b)] = v;
                }
            }
            Ok(m)
        }
        _ => err(head.no, format!("{what}: expected `dense` or `triplets`")),
    }
}

/// Parse the text of a problem file.
pub fn parse_str(text: &str) -> Result<ProblemFile, ParseError> {
    let mut cur = Cursor::new(text);
    match cur.next_line() {
        Some(l) if l.tokens == ["QPT", "1"] => {}
        Some(l) => return err(l.no, format!("expected header `{HEADER}`")),
        None => return err(0, "empty file"),
    }
    let mut name = None;
    let mut dims: Option<(usize, usize)> = None;
    let mut hessian = None;
    let mut constraints = None;
    let mut cost = None;
    let mut lower = None;
    let mut upper: Option<(Vec<f64>, usize)> = None;
    while let Some(line) = cur.lines.get(cur.pos) {
        let head = Line { no: line.no, tokens: line.tokens.clone() };
        cur.pos += 1;
        let key = head.tokens[0].as_str();
        let seen = match key {
            "name" => name.is_some(),
            "dims" => dims.is_some(),
            "hessian" => hessian.is_some(),
            "constraints" => constraints.is_some(),
            "cost" => cost.is_some(),
            "lower" => lower.is_some(),
            "upper" => upper.is_some(),
            "end" => {
                if let Some(extra) = cur.lines.get(cur.pos) {
                    return err(extra.no, "content after `end`");
                }
                break;
            }
            _ => return err(head.no, format!("unknown section `{key}`")),
        };
        if seen {
            return err(head.no, format!("duplicate `{key}` section"));
        }
        if key == "name" {
            expect_args(&head, 1)?;
            name = Some(head.tokens[1].clone());
            continue;
        }
        if key == "dims" {
            expect_args(&head, 2)?;
            dims = Some((count(&head.tokens[1], head.no)?, count(&head.tokens[2], head.no)?));
            continue;
        }
        let Some((n, m)) = dims else {
            return err(head.no, format!("`{key}` before `dims`"));
        };
        match key {
            "hessian" => hessian = Some(block(&mut cur, &head, "hessian", n, n, true)?),
            "constraints" => constraints = Some(block(&mut cur, &head, "constraints", m, n, false)?),
            "cost" => {
                expect_args(&head, 0)?;
                cost = Some(cur.values("cost", n, false)?);
            }
            "lower" => {
                expect_args(&head, 0)?;
                lower = Some(cur.values("lower", n + m, true)?);
            }
            _ => {
                expect_args(&head, 0)?;
                upper = Some((cur.values("upper", n + m, true)?, head.no));
            }
        }
    }
    let end = cur.last_line_no();
    let Some((n, m)) = dims else { return err(end, "missing `dims` section") };
    let Some(hessian) = hessian else { return err(end, "missing `hessian` section") };
    let Some(constraints) = constraints else { return err(end, "missing `constraints` section") };
    let Some(cost) = cost else { return err(end, "missing `cost` section") };
    let Some(lower) = lower else { return err(end, "missing `lower` section") };
    let Some((upper, upper_line)) = upper else { return err(end, "missing `upper` section") };
    for j in 0..n + m {
        let (l, u) = (lower[j], upper[j]);
        if l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
            return err(upper_line, format!("bound inconsistency at entry {}: lower {l:?}, upper {u:?}", j + 1));
        }
    }
    let problem =
        GeneralQp::new(hessian, constraints, Vector::from_vec(cost), Vector::from_vec(lower), Vector::from_vec(upper))
            .or_else(|e| err(0, e.to_string()))?;
    Ok(ProblemFile { name, problem })
}

fn push_values(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    let row: Vec<String> = vals.into_iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn push_block(out: &mut String, key: &str, a: &Matrix, upper_only: bool) {
    let entries: Vec<(usize, usize, f64)> = (0..a.nrows())
        .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| !upper_only || i <= j)
        .map(|(i, j)| (i, j, a[(i, j)]))
        .filter(|e| e.2 != 0.0)
        .collect();
    if 2 * entries.len() < a.nrows() * a.ncols() {
        let _ = writeln!(out, "{key} triplets {}", entries.len());
        for (i, j, v) in entries {
            let _ = writeln!(out, "{} {} {v:?}", i + 1, j + 1);
        }
    } else {
        let _ = writeln!(out, "{key} dense");
        for i in 0..a.nrows() {
            push_values(out, a.row(i).iter().copied());
        }
    }
}

/// Canonical text for a problem; `parse_str` gives back the same data.
pub fn emit(file: &ProblemFile) -> String {
    let g = &file.problem;
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    if let Some(name) = &file.name {
        let _ = writeln!(out, "name {name}");
    }
    let _ = writeln!(out, "dims {} {}", g.nvars(), g.ncons());
    push_block(&mut out, "hessian", &g.hessian, true);
    push_block(&mut out, "constraints", &g.constraints, false);
    out.push_str("cost\n");
    push_values(&mut out, g.cost.iter().copied());
    out.push_str("lower\n");
    push_values(&mut out, g.lower.iter().copied());
    out.push_str("upper\n");
    push_values(&mut out, g.upper.iter().copied());
    out.push_str("end\n");
    out
}
