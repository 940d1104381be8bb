//! One index per input mode behind a common interface.

use std::collections::HashMap;

use serde::Serialize;

use range_majority::snapshot::{Mode, Points, Snapshot};
use range_majority::{AlphaConfig, Error, MajorityArray, MajorityIndex, MajorityIndex2D, QueryAnswer, Rational, Real};

use crate::failure::Failure;
use crate::input::{Event, Scalar, StreamOp};

pub enum Engine {
    Real(MajorityIndex<Real, String>),
    Int(MajorityIndex<i64, String>),
    Plane(MajorityIndex2D<Real, Real, String>),
    Array(MajorityArray<String>),
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub mode: &'static str,
    pub alpha: String,
    pub n: usize,
    pub colours: usize,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub colour: String,
    pub count: u64,
    pub fraction: f64,
    pub m: u64,
}

/// Report rows in count order.
pub fn rows(answer: &QueryAnswer<String>) -> Vec<Row> {
    answer
        .colours
        .iter()
        .map(|r| Row {
            colour: r.colour.clone(),
            count: r.count,
            fraction: r.count as f64 / answer.m as f64,
            m: answer.m,
        })
        .collect()
}

fn constraint(line: usize, e: Error) -> Failure {
    Failure::Constraint(format!("line {line}: {e}"))
}

fn input(line: usize, message: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("line {line}: {message}"))
}

fn real(s: Scalar) -> Real {
    Real::from(s.as_f64())
}

fn int(line: usize, s: Scalar) -> Result<i64, Failure> {
    s.as_int().ok_or_else(|| input(line, format!("integer coordinate expected, found {}", s.as_f64())))
}

/// Converts parsed events into snapshot points for `mode`, rejecting
/// repeated coordinates. Array mode orders events by timestamp, keeping
/// input order among equal timestamps.
pub fn points_from_events(mode: Mode, mut events: Vec<Event>) -> Result<Points, Failure> {
    if mode != Mode::Plane {
        if let Some(e) = events.iter().find(|e| e.y.is_some()) {
            return Err(input(e.line, "second coordinate given outside 2d mode"));
        }
    }
    fn unique<K: std::hash::Hash + Eq>(seen: &mut HashMap<K, usize>, key: K, line: usize) -> Result<(), Failure> {
        if let Some(first) = seen.insert(key, line) {
            return Err(Failure::Constraint(format!("line {line}: duplicate coordinate (first on line {first})")));
        }
        Ok(())
    }
    Ok(match mode {
        Mode::Int => {
            let mut seen = HashMap::new();
            let mut out = Vec::with_capacity(events.len());
            for e in events {
                let x = int(e.line, e.timestamp)?;
                unique(&mut seen, x, e.line)?;
                out.push((x, e.category));
            }
            Points::Int(out)
        }
        Mode::Real => {
            let mut seen = HashMap::new();
            let mut out = Vec::with_capacity(events.len());
            for e in events {
                let x = real(e.timestamp);
                unique(&mut seen, x, e.line)?;
                out.push((x, e.category));
            }
            Points::Real(out)
        }
        Mode::Plane => {
            let mut seen = HashMap::new();
            let mut out = Vec::with_capacity(events.len());
            for e in events {
                let y = e.y.ok_or_else(|| input(e.line, "2d mode needs timestamp,category,y"))?;
                let p = (real(e.timestamp), real(y));
                unique(&mut seen, p, e.line)?;
                out.push((p, e.category));
            }
            Points::Plane(out)
        }
        Mode::Array => {
            events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            Points::Array(events.into_iter().map(|e| e.category).collect())
        }
    })
}

impl Engine {
    pub fn empty(mode: Mode, alpha: Rational) -> Result<Self, Failure> {
        let points = match mode {
            Mode::Real => Points::Real(Vec::new()),
            Mode::Int => Points::Int(Vec::new()),
            Mode::Plane => Points::Plane(Vec::new()),
            Mode::Array => Points::Array(Vec::new()),
        };
        Self::from_snapshot(Snapshot { alpha, points })
    }

    pub fn from_snapshot(snapshot: Snapshot) -> Result<Self, Failure> {
        let config = AlphaConfig::new(snapshot.alpha).map_err(|e| Failure::Input(e.to_string()))?;
        let dup = |e: Error| Failure::Constraint(format!("snapshot: {e}"));
        Ok(match snapshot.points {
            Points::Real(v) => Engine::Real(MajorityIndex::build(config, v).map_err(dup)?),
            Points::Int(v) => Engine::Int(MajorityIndex::build(config, v).map_err(dup)?),
            Points::Plane(v) => Engine::Plane(MajorityIndex2D::build(config, v).map_err(dup)?),
            Points::Array(v) => Engine::Array(MajorityArray::from_colours(config, v).map_err(dup)?),
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        let (alpha, points) = match self {
            Engine::Real(ix) => (ix.alpha(), Points::Real(ix.points())),
            Engine::Int(ix) => (ix.alpha(), Points::Int(ix.points())),
            Engine::Plane(ix) => (ix.config().alpha, Points::Plane(ix.points())),
            Engine::Array(a) => (a.config().alpha, Points::Array(a.to_vec())),
        };
        Snapshot { alpha, points }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Engine::Real(_) => Mode::Real,
            Engine::Int(_) => Mode::Int,
            Engine::Plane(_) => Mode::Plane,
            Engine::Array(_) => Mode::Array,
        }
    }

    pub fn alpha(&self) -> Rational {
        match self {
            Engine::Real(ix) => ix.alpha(),
            Engine::Int(ix) => ix.alpha(),
            Engine::Plane(ix) => ix.config().alpha,
            Engine::Array(a) => a.config().alpha,
        }
    }

    pub fn summary(&self) -> Summary {
        let (n, colours, height) = match self {
            Engine::Real(ix) => (ix.len(), ix.registry().live_count(), ix.tree().height()),
            Engine::Int(ix) => (ix.len(), ix.registry().live_count(), ix.tree().height()),
            Engine::Plane(ix) => (ix.len(), ix.registry().live_count(), ix.height()),
            Engine::Array(a) => (a.len(), a.engine().registry().live_count(), a.engine().tree().height()),
        };
        let alpha = self.alpha();
        Summary {
            mode: self.mode().name(),
            alpha: format!("{}/{}", alpha.numer(), alpha.denom()),
            n,
            colours,
            height,
        }
    }

    /// Answers a query given as text arguments; array bounds are 1-based positions.
    pub fn query_text(&mut self, lo: &str, hi: &str, y: Option<(&str, &str)>) -> Result<QueryAnswer<String>, Failure> {
        let parse = |what: &str, s: &str| {
            Scalar::parse(s).ok_or_else(|| Failure::Input(format!("bad {what} bound {s:?}")))
        };
        let y = match y {
            Some((a, b)) => Some((parse("y", a)?, parse("y", b)?)),
            None => None,
        };
        self.query(0, parse("lower", lo)?, parse("upper", hi)?, y)
    }

    pub fn query(&mut self, line: usize, lo: Scalar, hi: Scalar, y: Option<(Scalar, Scalar)>) -> Result<QueryAnswer<String>, Failure> {
        let at = |m: String| if line == 0 { Failure::Input(m) } else { input(line, m) };
        if lo.total_cmp(&hi).is_gt() {
            return Err(at("query range is empty: lower bound above upper bound".into()));
        }
        if y.is_some() != (self.mode() == Mode::Plane) {
            return Err(at("y bounds are required in 2d mode and only there".into()));
        }
        let failed = |e: Error| at(e.to_string());
        match self {
            Engine::Real(ix) => ix.query_counts(&real(lo), &real(hi)).map_err(failed),
            Engine::Int(ix) => {
                let (lo, hi) = (lo.as_int(), hi.as_int());
                let (Some(lo), Some(hi)) = (lo, hi) else {
                    return Err(at("integer bounds expected".into()));
                };
                ix.query_counts(&lo, &hi).map_err(failed)
            }
            Engine::Plane(ix) => {
                let (ylo, yhi) = y.expect("checked above");
                if ylo.total_cmp(&yhi).is_gt() {
                    return Err(at("query range is empty: lower y above upper y".into()));
                }
                ix.query_counts((&real(lo), &real(hi)), (&real(ylo), &real(yhi))).map_err(failed)
            }
            Engine::Array(a) => {
                let pos = |s: Scalar| s.as_int().filter(|&p| p >= 1).map(|p| p as usize);
                let (Some(i), Some(j)) = (pos(lo), pos(hi)) else {
                    return Err(at("array bounds are positions starting at 1".into()));
                };
                a.query_counts(i, j).map_err(failed)
            }
        }
    }

    /// Applies one non-query stream operation.
    pub fn apply(&mut self, line: usize, op: StreamOp) -> Result<(), Failure> {
        let (timestamp, y, pos, category, kind) = match op {
            StreamOp::Insert { timestamp, y, pos, category } => (timestamp, y, pos, Some(category), "insert"),
            StreamOp::Delete { timestamp, y, pos } => (timestamp, y, pos, None, "delete"),
            StreamOp::Modify { timestamp, y, pos, category } => (timestamp, y, pos, Some(category), "modify"),
            StreamOp::Query { .. } => unreachable!("queries are answered by the caller"),
        };
        let need_x = || timestamp.ok_or_else(|| input(line, format!("{kind} needs a timestamp")));
        let fail = |e: Error| constraint(line, e);
        match self {
            Engine::Array(a) => {
                let p = pos.ok_or_else(|| input(line, format!("{kind} needs a pos in array mode")))?;
                match (kind, category) {
                    ("insert", Some(c)) => a.insert(p, c).map_err(fail),
                    ("modify", Some(c)) => a.modify(p, c).map(drop).map_err(fail),
                    _ => a.delete(p).map(drop).map_err(fail),
                }
            }
            Engine::Plane(ix) => {
                let y = y.ok_or_else(|| input(line, format!("{kind} needs y in 2d mode")))?;
                let p = (real(need_x()?), real(y));
                match (kind, category) {
                    ("insert", Some(c)) => ix.insert(p, c).map_err(fail),
                    ("modify", Some(c)) => {
                        ix.delete(&p).map_err(fail)?;
                        ix.insert(p, c).map_err(fail)
                    }
                    _ => ix.delete(&p).map(drop).map_err(fail),
                }
            }
            Engine::Real(ix) => {
                let x = real(need_x()?);
                match (kind, category) {
                    ("insert", Some(c)) => ix.insert(x, c).map(drop).map_err(fail),
                    ("modify", Some(c)) => {
                        ix.delete(&x).map_err(fail)?;
                        ix.insert(x, c).map(drop).map_err(fail)
                    }
                    _ => ix.delete(&x).map(drop).map_err(fail),
                }
            }
            Engine::Int(ix) => {
                let x = int(line, need_x()?)?;
                match (kind, category) {
                    ("insert", Some(c)) => ix.insert(x, c).map(drop).map_err(fail),
                    ("modify", Some(c)) => {
                        ix.delete(&x).map_err(fail)?;
                        ix.insert(x, c).map(drop).map_err(fail)
                    }
                    _ => ix.delete(&x).map(drop).map_err(fail),
                }
            }
        }
    }
}
