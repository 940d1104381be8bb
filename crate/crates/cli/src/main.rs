//! `rmaj`: heavy-hitter analysis of timestamped event logs.
//!
//! Exit status: 0 on success, 1 when a self-test or an expected answer in a
//! replay stream fails, 2 on malformed input, 3 on constraint violations
//! such as duplicate coordinates.

mod engine;
mod failure;
mod input;
mod run;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use range_majority::params::parse_rational;
use range_majority::snapshot::{Mode, Snapshot};
use range_majority::Rational;

use engine::{points_from_events, rows, Engine};
use failure::Failure;
use input::{read_events, read_stream, Format, StreamOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Real,
    Int,
    #[value(name = "2d")]
    Plane,
    Array,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Real => Mode::Real,
            ModeArg::Int => Mode::Int,
            ModeArg::Plane => Mode::Plane,
            ModeArg::Array => Mode::Array,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rmaj", version, about = "Heavy-hitter analysis of timestamped event logs")]
struct Cli {
    /// Reporting threshold as a fraction `p/q` or decimal in (0, 1) [default: 1/10]
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Coordinate model of the input [default: int]
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an index from an event log and save a snapshot.
    Build {
        /// Event log: CSV `timestamp,category[,y]` or JSONL with the same fields
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        /// Input format; guessed from the file extension when omitted
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// The first input line is a header
        #[arg(long)]
        header: bool,
    },
    /// Report the heavy hitters of a range of a snapshot as JSON lines.
    #[command(allow_negative_numbers = true)]
    Query {
        #[arg(long)]
        snapshot: PathBuf,
        /// Lower bound (a 1-based position in array mode)
        lo: String,
        /// Upper bound, inclusive
        hi: String,
        /// Lower y bound (2d mode)
        ylo: Option<String>,
        /// Upper y bound (2d mode)
        yhi: Option<String>,
    },
    /// Apply a JSONL operation stream and answer its queries.
    Replay {
        /// Stream of `{"op": "insert"|"delete"|"modify"|"query", ...}` lines
        #[arg(long)]
        input: PathBuf,
        /// Starting state; empty when omitted
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Write the final state as a snapshot
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Measure operation latency on random integer data, written as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1/2,1/10")]
        alphas: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Operations timed per cell and kind
        #[arg(long, default_value_t = 2_000)]
        iters: usize,
    },
    /// Cross-check every index against brute force on random operations.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Operations per suite
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
    },
}

fn alpha_arg(text: &str) -> Result<Rational, Failure> {
    parse_rational(text).map_err(|e| Failure::Input(format!("bad alpha {text:?}: {e}")))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Engine, Failure> {
    let snapshot = Snapshot::read(open(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Engine::from_snapshot(snapshot)
}

fn write_snapshot(snap: &Snapshot, path: &Path) -> Result<(), Failure> {
    let failed = |e: String| Failure::Input(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(|e| failed(e.to_string()))?);
    snap.write(&mut w).map_err(|e| failed(e.to_string()))?;
    w.flush().map_err(|e| failed(e.to_string()))
}

fn emit(out: &mut impl Write, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string(value).expect("plain data serialises");
    writeln!(out, "{text}").map_err(|e| Failure::Input(format!("writing output: {e}")))
}

#[derive(serde::Serialize)]
struct ReplayAnswer<'a> {
    line: usize,
    m: u64,
    colours: &'a [engine::Row],
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let alpha = cli.alpha.as_deref().map(alpha_arg).transpose()?;
    let mode = cli.mode.map(Mode::from);
    match cli.command {
        Command::Build {
            input,
            snapshot,
            format,
            header,
        } => {
            let format = format.unwrap_or_else(|| Format::guess(&input));
            let events = read_events(open(&input)?, format, header)
                .map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
            log::info!("read {} events from {}", events.len(), input.display());
            let points = points_from_events(mode.unwrap_or(Mode::Int), events)?;
            let snap = Snapshot {
                alpha: alpha.unwrap_or(Rational::new(1, 10)),
                points,
            };
            let engine = Engine::from_snapshot(snap.clone())?;
            write_snapshot(&snap, &snapshot)?;
            emit(&mut out, &engine.summary())?;
        }
        Command::Query {
            snapshot,
            lo,
            hi,
            ylo,
            yhi,
        } => {
            let mut engine = load(&snapshot)?;
            if mode.is_some_and(|m| m != engine.mode()) {
                log::warn!("--mode ignored: the snapshot is in {} mode", engine.mode().name());
            }
            let y = match (&ylo, &yhi) {
                (Some(a), Some(b)) => Some((a.as_str(), b.as_str())),
                (None, None) => None,
                _ => return Err(Failure::Input("give both y bounds or neither".into())),
            };
            let answer = engine.query_text(&lo, &hi, y)?;
            for row in rows(&answer) {
                emit(&mut out, &row)?;
            }
        }
        Command::Replay { input, snapshot, save } => {
            let mut engine = match snapshot {
                Some(path) => load(&path)?,
                None => Engine::empty(mode.unwrap_or(Mode::Int), alpha.unwrap_or(Rational::new(1, 10)))?,
            };
            let ops = read_stream(open(&input)?)?;
            let mut disagreements = 0;
            for (line, op) in ops {
                match op {
                    StreamOp::Query {
                        lo,
                        hi,
                        ylo,
                        yhi,
                        expect,
                    } => {
                        let y = match (ylo, yhi) {
                            (Some(a), Some(b)) => Some((a, b)),
                            (None, None) => None,
                            _ => return Err(Failure::Input(format!("line {line}: give both y bounds or neither"))),
                        };
                        let answer = engine.query(line, lo, hi, y)?;
                        if let Some(mut want) = expect {
                            want.sort();
                            if want != answer.labels() {
                                disagreements += 1;
                                log::error!("line {line}: expected {want:?}, got {:?}", answer.labels());
                            }
                        }
                        let rows = rows(&answer);
                        emit(&mut out, &ReplayAnswer { line, m: answer.m, colours: &rows })?;
                    }
                    op => engine.apply(line, op)?,
                }
            }
            if let Some(path) = save {
                write_snapshot(&engine.snapshot(), &path)?;
            }
            if disagreements > 0 {
                out.flush().ok();
                return Err(Failure::Verification(format!("{disagreements} queries disagreed with their expected answers")));
            }
        }
        Command::Bench {
            sizes,
            alphas,
            seed,
            iters,
        } => {
            let alphas = match alpha {
                Some(a) => vec![a],
                None => alphas.iter().map(|a| alpha_arg(a)).collect::<Result<_, _>>()?,
            };
            run::bench(&mut out, &sizes, &alphas, seed, iters)?;
        }
        Command::Selftest { seed, iters } => {
            let alphas = match alpha {
                Some(a) => vec![a],
                None => [(1, 2), (1, 4), (1, 10), (1, 100)].map(|(p, q)| Rational::new(p, q)).to_vec(),
            };
            let result = run::selftest(&mut out, &alphas, seed, iters);
            out.flush().ok();
            result?;
        }
    }
    out.flush().map_err(|e| Failure::Input(format!("writing output: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RANGE_MAJ_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("rmaj: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
