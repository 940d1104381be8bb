//! Event logs (CSV or JSONL) and replay streams.

use std::cmp::Ordering;
use std::io::BufRead;

use serde::Deserialize;

use crate::failure::Failure;

/// A numeric field as written in the input.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Real(f64),
}

impl Scalar {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(v) = text.parse::<i64>() {
            return Some(Scalar::Int(v));
        }
        text.parse::<f64>().ok().filter(|v| v.is_finite()).map(Scalar::Real)
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Scalar::Int(v) => v as f64,
            Scalar::Real(v) => v,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Scalar::Int(v) => Some(v),
            Scalar::Real(_) => None,
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => a.cmp(b),
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `jsonl` for `.jsonl`/`.json` paths, CSV otherwise.
    pub fn guess(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json" | "ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// 1-based line in the input.
    pub line: usize,
    pub timestamp: Scalar,
    pub category: String,
    pub y: Option<Scalar>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEvent {
    timestamp: Scalar,
    category: String,
    #[serde(default)]
    y: Option<Scalar>,
}

fn bad(line: usize, message: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("line {line}: {message}"))
}

pub fn read_events(input: impl BufRead, format: Format, header: bool) -> Result<Vec<Event>, Failure> {
    match format {
        Format::Csv => read_csv(input, header),
        Format::Jsonl => read_jsonl(input, header),
    }
}

fn read_csv(input: impl BufRead, header: bool) -> Result<Vec<Event>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            bad(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if !(2..=3).contains(&record.len()) {
            return Err(bad(line, format!("expected timestamp,category[,y], found {} fields", record.len())));
        }
        let timestamp = Scalar::parse(&record[0]).ok_or_else(|| bad(line, format!("bad timestamp {:?}", &record[0])))?;
        let category = record[1].to_string();
        if category.is_empty() {
            return Err(bad(line, "empty category"));
        }
        let y = match record.get(2) {
            Some(text) => Some(Scalar::parse(text).ok_or_else(|| bad(line, format!("bad y {text:?}")))?),
            None => None,
        };
        events.push(Event {
            line,
            timestamp,
            category,
            y,
        });
    }
    Ok(events)
}

fn read_jsonl(input: impl BufRead, header: bool) -> Result<Vec<Event>, Failure> {
    let mut events = Vec::new();
    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| bad(line, e))?;
        if text.trim().is_empty() || (header && line == 1) {
            continue;
        }
        let e: JsonEvent = serde_json::from_str(&text).map_err(|e| bad(line, e))?;
        events.push(Event {
            line,
            timestamp: e.timestamp,
            category: e.category,
            y: e.y,
        });
    }
    Ok(events)
}

/// One operation of a replay stream. Array streams address elements with
/// `pos`, the other modes with `timestamp` (and `y` in the plane).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum StreamOp {
    Insert {
        #[serde(default)]
        timestamp: Option<Scalar>,
        #[serde(default)]
        y: Option<Scalar>,
        #[serde(default)]
        pos: Option<usize>,
        category: String,
    },
    Delete {
        #[serde(default)]
        timestamp: Option<Scalar>,
        #[serde(default)]
        y: Option<Scalar>,
        #[serde(default)]
        pos: Option<usize>,
    },
    Modify {
        #[serde(default)]
        timestamp: Option<Scalar>,
        #[serde(default)]
        y: Option<Scalar>,
        #[serde(default)]
        pos: Option<usize>,
        category: String,
    },
    Query {
        lo: Scalar,
        hi: Scalar,
        #[serde(default)]
        ylo: Option<Scalar>,
        #[serde(default)]
        yhi: Option<Scalar>,
        /// Expected colours, in any order.
        #[serde(default)]
        expect: Option<Vec<String>>,
    },
}

pub fn read_stream(input: impl BufRead) -> Result<Vec<(usize, StreamOp)>, Failure> {
    let mut ops = Vec::new();
    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| bad(line, e))?;
        if text.trim().is_empty() {
            continue;
        }
        ops.push((line, serde_json::from_str(&text).map_err(|e| bad(line, e))?));
    }
    Ok(ops)
}
