//! Flat snapshot format: one JSON header line followed by one JSON record
//! per point. Reloading rebuilds the index from the records; no tree
//! layout is stored.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::coord::Real;
use crate::params::{parse_rational, Rational};

pub const FORMAT: &str = "range-majority-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Real,
    Int,
    #[serde(rename = "2d")]
    Plane,
    Array,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Real => "real",
            Mode::Int => "int",
            Mode::Plane => "2d",
            Mode::Array => "array",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    mode: Mode,
    alpha: String,
    points: usize,
}

#[derive(Serialize, Deserialize)]
struct LineRecord<T> {
    x: T,
    colour: String,
}

#[derive(Serialize, Deserialize)]
struct PlaneRecord {
    x: f64,
    y: f64,
    colour: String,
}

#[derive(Serialize, Deserialize)]
struct ArrayRecord {
    colour: String,
}

/// Point data of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    Real(Vec<(Real, String)>),
    Int(Vec<(i64, String)>),
    Plane(Vec<((Real, Real), String)>),
    /// Colours in array order.
    Array(Vec<String>),
}

impl Points {
    pub fn mode(&self) -> Mode {
        match self {
            Points::Real(_) => Mode::Real,
            Points::Int(_) => Mode::Int,
            Points::Plane(_) => Mode::Plane,
            Points::Array(_) => Mode::Array,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Points::Real(v) => v.len(),
            Points::Int(v) => v.len(),
            Points::Plane(v) => v.len(),
            Points::Array(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub alpha: Rational,
    pub points: Points,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl ToString) -> SnapshotError {
    SnapshotError::Parse {
        line,
        message: message.to_string(),
    }
}

impl Snapshot {
    pub fn write(&self, mut out: impl Write) -> Result<(), SnapshotError> {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            mode: self.points.mode(),
            alpha: format!("{}/{}", self.alpha.numer(), self.alpha.denom()),
            points: self.points.len(),
        };
        let to_io = |e: serde_json::Error| SnapshotError::Io(e.into());
        serde_json::to_writer(&mut out, &header).map_err(to_io)?;
        writeln!(out)?;
        match &self.points {
            Points::Real(v) => {
                for (x, c) in v {
                    serde_json::to_writer(&mut out, &LineRecord { x: x.0, colour: c.clone() }).map_err(to_io)?;
                    writeln!(out)?;
                }
            }
            Points::Int(v) => {
                for (x, c) in v {
                    serde_json::to_writer(&mut out, &LineRecord { x: *x, colour: c.clone() }).map_err(to_io)?;
                    writeln!(out)?;
                }
            }
            Points::Plane(v) => {
                for ((x, y), c) in v {
                    let rec = PlaneRecord { x: x.0, y: y.0, colour: c.clone() };
                    serde_json::to_writer(&mut out, &rec).map_err(to_io)?;
                    writeln!(out)?;
                }
            }
            Points::Array(v) => {
                for c in v {
                    serde_json::to_writer(&mut out, &ArrayRecord { colour: c.clone() }).map_err(to_io)?;
                    writeln!(out)?;
                }
            }
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self, SnapshotError> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty snapshot"))?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| parse_err(1, e))?;
        if header.format != FORMAT {
            return Err(parse_err(1, format!("unknown format {:?}", header.format)));
        }
        if header.version != VERSION {
            return Err(parse_err(1, format!("unsupported version {}", header.version)));
        }
        let alpha = parse_rational(&header.alpha).map_err(|e| parse_err(1, e))?;
        let mut points = match header.mode {
            Mode::Real => Points::Real(Vec::with_capacity(header.points)),
            Mode::Int => Points::Int(Vec::with_capacity(header.points)),
            Mode::Plane => Points::Plane(Vec::with_capacity(header.points)),
            Mode::Array => Points::Array(Vec::with_capacity(header.points)),
        };
        for (no, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| parse_err(no, e);
            match &mut points {
                Points::Real(v) => {
                    let r: LineRecord<f64> = serde_json::from_str(&line).map_err(bad)?;
                    v.push((Real::from(r.x), r.colour));
                }
                Points::Int(v) => {
                    let r: LineRecord<i64> = serde_json::from_str(&line).map_err(bad)?;
                    v.push((r.x, r.colour));
                }
                Points::Plane(v) => {
                    let r: PlaneRecord = serde_json::from_str(&line).map_err(bad)?;
                    v.push(((Real::from(r.x), Real::from(r.y)), r.colour));
                }
                Points::Array(v) => {
                    let r: ArrayRecord = serde_json::from_str(&line).map_err(bad)?;
                    v.push(r.colour);
                }
            }
        }
        if points.len() != header.points {
            return Err(parse_err(
                1,
                format!("header announces {} points, found {}", header.points, points.len()),
            ));
        }
        Ok(Snapshot { alpha, points })
    }
}
