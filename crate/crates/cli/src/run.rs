//! Benchmark and self-test commands.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use range_majority::harness::{
    fuzz_1d, fuzz_2d, fuzz_array, percentiles, query_latency, random_int_index, Fuzz1D, Fuzz2D, FuzzArray, FuzzReport,
};
use range_majority::{Rational, Real};

use crate::failure::Failure;

#[derive(Debug, Serialize)]
struct BenchRow {
    n: usize,
    alpha: String,
    op: &'static str,
    p50_ns: u128,
    p99_ns: u128,
    /// Candidate-list rebuild leaf visits per update.
    rebuild_work: f64,
}

fn show(alpha: Rational) -> String {
    format!("{}/{}", alpha.numer(), alpha.denom())
}

/// Latency percentiles per `(n, alpha, op)` cell as CSV: random range
/// queries, then `iters` inserts of fresh keys, then their deletion.
pub fn bench(out: impl Write, sizes: &[usize], alphas: &[Rational], seed: u64, iters: usize) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::Input(format!("writing results: {e}"));
    let mut w = csv::Writer::from_writer(out);
    for &n in sizes {
        for &alpha in alphas {
            log::info!("bench n={n} alpha={}", show(alpha));
            let mut index = random_int_index(seed, n, alpha);
            let (p50, p99) = query_latency(&mut index, seed, iters);
            w.serialize(BenchRow {
                n,
                alpha: show(alpha),
                op: "query",
                p50_ns: p50.as_nanos(),
                p99_ns: p99.as_nanos(),
                rebuild_work: 0.0,
            })
            .map_err(io)?;

            // Spread odd keys; those already present are skipped.
            let span = (n as i64).max(1) * 1_000;
            let fresh: Vec<i64> = (0..iters as i64)
                .map(|i| (i.wrapping_mul(7_919) % span) | 1)
                .filter(|k| !index.contains(k))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            for (op, insert) in [("insert", true), ("delete", false)] {
                let before = index.tree().stats().rebuild_leaf_visits;
                let mut times = Vec::with_capacity(fresh.len());
                for (i, &k) in fresh.iter().enumerate() {
                    let t = Instant::now();
                    let done = if insert {
                        index.insert(k, (i % 64) as u32).is_ok()
                    } else {
                        index.delete(&k).is_ok()
                    };
                    times.push(t.elapsed());
                    debug_assert!(done);
                }
                let work = index.tree().stats().rebuild_leaf_visits - before;
                let (p50, p99) = percentiles(&mut times);
                w.serialize(BenchRow {
                    n,
                    alpha: show(alpha),
                    op,
                    p50_ns: p50.as_nanos(),
                    p99_ns: p99.as_nanos(),
                    rebuild_work: work as f64 / fresh.len().max(1) as f64,
                })
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Failure::Input(format!("writing results: {e}")))
}

#[derive(Debug, Serialize)]
struct SuiteLine {
    suite: &'static str,
    alpha: String,
    ops: usize,
    queries: u64,
    mismatches: u64,
    bound_violations: u64,
    audit_failures: u64,
    ok: bool,
}

fn line(suite: &'static str, alpha: Rational, ops: usize, r: &FuzzReport) -> SuiteLine {
    SuiteLine {
        suite,
        alpha: show(alpha),
        ops,
        queries: r.queries,
        mismatches: r.mismatches,
        bound_violations: r.bounds.violations(),
        audit_failures: r.audit_failures,
        ok: r.ok(),
    }
}

/// Runs the oracle-equivalence and bound-checking drivers, one JSON line
/// per suite. Output depends only on `seed` and `iters`.
pub fn selftest(mut out: impl Write, alphas: &[Rational], seed: u64, iters: usize) -> Result<(), Failure> {
    let mut lines = Vec::new();
    for &alpha in alphas {
        let cfg = Fuzz1D {
            seed,
            ops: iters,
            alpha,
            ..Fuzz1D::default()
        };
        let r = fuzz_1d(&cfg, |x| x as i64);
        lines.push((line("int", alpha, iters, &r), r));
        let r = fuzz_1d(&Fuzz1D { seed: seed ^ 1, ..cfg }, |x| Real::from(x as f64 / 3.0));
        lines.push((line("real", alpha, iters, &r), r));
        let plane = Fuzz2D {
            seed,
            alpha,
            initial: (iters / 5).min(2_000),
            ops: iters / 2,
            ..Fuzz2D::default()
        };
        let r = fuzz_2d(&plane);
        lines.push((line("2d", alpha, plane.ops, &r), r));
        let array = FuzzArray {
            seed,
            alpha,
            ops: iters,
            ..FuzzArray::default()
        };
        let r = fuzz_array(&array);
        lines.push((line("array", alpha, iters, &r), r));
    }
    let write = |e: std::io::Error| Failure::Input(format!("writing results: {e}"));
    let mut failed = 0;
    for (summary, report) in &lines {
        log::info!("{} alpha={} took {:?}", summary.suite, summary.alpha, report.elapsed);
        for f in &report.failures {
            log::error!("{} alpha={}: {f}", summary.suite, summary.alpha);
        }
        failed += !summary.ok as usize;
        let text = serde_json::to_string(summary).expect("plain struct serialises");
        writeln!(out, "{text}").map_err(write)?;
    }
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {} self-test suites failed", lines.len())));
    }
    Ok(())
}
