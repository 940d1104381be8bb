//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use range_majority::harness::{
    fuzz_1d, fuzz_2d, fuzz_array, query_latency, random_int_index, rebuild_work, Fuzz1D, Fuzz2D, FuzzArray,
    FuzzReport,
};
use range_majority::oracle::{gamma_cap, naive_gamma};
use range_majority::params::{gamma_lower_bound, SignedRational};
use range_majority::{AlphaConfig, ColourId, MajorityIndex, MajorityTree, NodeRef, Rational, ScratchCounters};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn show_failures(report: &FuzzReport) {
    for f in report.failures.iter().take(5) {
        eprintln!("    {f}");
    }
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const ALPHAS: [(u64, u64); 4] = [(1, 2), (1, 4), (1, 10), (1, 100)];

/// Runs the four one-dimensional fuzz runs shared by several criteria.
fn one_dimensional_runs() -> Vec<(Rational, FuzzReport)> {
    ALPHAS
        .iter()
        .enumerate()
        .map(|(i, &(p, q))| {
            let alpha = Rational::new(p, q);
            let cfg = Fuzz1D {
                seed: 100 + i as u64,
                ops: 100_000,
                alpha,
                universe: 1_000_000,
                colours: 64,
                zipf: 1.2,
                insert_percent: 40,
                delete_percent: 20,
                audit_every: 25_000,
                cross_check_every: 64,
                check_bounds: true,
            };
            (alpha, fuzz_1d(&cfg, |x| x as i64))
        })
        .collect()
}

fn oracle_equivalence(runs: &[(Rational, FuzzReport)]) -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (alpha, r) in runs {
        passed &= r.mismatches == 0;
        parts.push(format!("alpha={alpha}: {} queries, {} mismatches, {}", r.queries, r.mismatches, secs(r.elapsed)));
        if r.mismatches > 0 {
            show_failures(r);
        }
    }
    let per_run = runs.iter().map(|r| r.1.elapsed).max().unwrap_or_default();
    passed &= per_run < Duration::from_secs(60);
    outcome(passed, format!("{} (slowest run {})", parts.join("; "), secs(per_run)))
}

fn mass_bounds(runs: &[(Rational, FuzzReport)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (alpha, r) in runs {
        let b = &r.bounds;
        passed &= b.violations() == 0 && b.checked > 0;
        parts.push(format!(
            "alpha={alpha}: {} general queries, level {} / unlisted {} / below-top {} / survivors {} violations, {} single-height",
            b.checked, b.level_mass, b.unlisted_mass, b.below_top, b.survivors, b.single_level
        ));
        if b.violations() > 0 {
            show_failures(r);
        }
    }
    outcome(passed, parts.join("; "))
}

fn gamma_bound() -> Outcome {
    let start = Instant::now();
    let mut checked = 0u64;
    let mut failures = Vec::new();
    for (p, q) in [(1, 2), (1, 3), (1, 5), (1, 10)] {
        let beta = Rational::new(p, q);
        for ell in 1..=60u64 {
            for m in 0..=(ell - 1) / 2 {
                checked += 1;
                let bound = gamma_lower_bound(ell, m, beta).expect("valid arguments");
                let exact = naive_gamma(ell, m, beta, gamma_cap(ell));
                let ok = match exact {
                    Some(g) => SignedRational::from_integer(g as i64) >= bound,
                    None => false,
                };
                if !ok && failures.len() < 5 {
                    failures.push(format!("beta={beta} ell={ell} m={m}: exact {exact:?} < bound {bound}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed < Duration::from_secs(10);
    outcome(passed, format!("{checked} cases, {} below bound {:?}, {}", failures.len(), failures, secs(elapsed)))
}

fn rebuild_laziness() -> Outcome {
    let config = AlphaConfig::new(Rational::new(1, 2)).expect("valid alpha");
    if config.beta != Rational::new(1, 21) {
        return outcome(false, format!("beta is {}, expected 1/21", config.beta));
    }
    let mut scratch = ScratchCounters::with_capacity(16);
    let points: Vec<(i64, ColourId)> = (0..420).map(|i| (i * 10, ColourId((i % 5) as u32 + 1))).collect();
    let mut tree = MajorityTree::from_sorted(config, &points, &mut scratch).expect("sorted points");
    let Some(NodeRef::Inner(root)) = tree.root() else {
        return outcome(false, "root is not an internal node");
    };
    let info = tree.node_info(root);
    let threshold = config.rebuild_threshold(420);
    if info.weight != 420 || threshold != 10 {
        return outcome(false, format!("weight {} threshold {threshold}", info.weight));
    }
    let start = info.rebuilds;
    let mut fired_after = None;
    for i in 0..20 {
        tree.insert(i * 10 + 5, ColourId(9), &mut scratch).expect("fresh key");
        if tree.node_info(root).rebuilds != start {
            fired_after = Some(i + 1);
            break;
        }
    }
    outcome(
        fired_after == Some(10),
        format!("threshold(420, 1/21) = {threshold}, rebuild after {fired_after:?} updates"),
    )
}

fn weight_balance(runs: &[(Rational, FuzzReport)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (alpha, r) in runs {
        match &r.final_balance {
            Some(Ok(())) => parts.push(format!("alpha={alpha}: balanced")),
            Some(Err(e)) => {
                passed = false;
                parts.push(format!("alpha={alpha}: {e}"));
            }
            None => {
                passed = false;
                parts.push(format!("alpha={alpha}: not audited"));
            }
        }
        if r.audit_failures > 0 {
            passed = false;
            parts.push(format!("alpha={alpha}: {} periodic audits failed", r.audit_failures));
            show_failures(r);
        }
    }
    outcome(passed, parts.join("; "))
}

fn findtop_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alpha = Rational::new(1, 10);
    let mut index: MajorityIndex<i64, u32> = MajorityIndex::with_alpha(alpha).expect("valid alpha");
    for _ in 0..60_000 {
        let _ = index.insert(rng.random_range(0..10_000_000), rng.random_range(0..64));
    }
    for _ in 0..20_000 {
        let k = index.select(rng.random_range(0..index.len())).expect("rank in range");
        index.delete(&k).expect("stored key");
    }
    let tree = index.tree();
    let t = tree.config().top_levels as usize;
    let leaves = tree.leaves_in_order();
    let (mut general, mut mismatches, mut over_budget, mut worst) = (0, 0, 0, 0);
    while general < 1_000 {
        let i = rng.random_range(0..leaves.len());
        let j = rng.random_range(0..leaves.len());
        let (a, b) = (leaves[i.min(j)], leaves[i.max(j)]);
        let full = tree.canonical(&tree.leaf_key(a), &tree.leaf_key(b));
        if full.len() < 2 {
            continue;
        }
        general += 1;
        let found = tree.findtop(a, b, t);
        if found.nodes.sorted_nodes() != full.top(t).sorted_nodes() {
            mismatches += 1;
        }
        worst = worst.max(found.lca_calls);
        if found.lca_calls > 4 * t {
            over_budget += 1;
        }
    }
    outcome(
        mismatches == 0 && over_budget == 0,
        format!("{general} general queries at t = {t}: {mismatches} mismatches, max {worst} LCA calls (budget {})", 4 * t),
    )
}

fn amortized_rebuilds() -> Outcome {
    let w = rebuild_work(7, 10_000, 100_000, Rational::new(1, 10));
    outcome(
        w.per_update <= w.budget,
        format!(
            "{} leaf visits over {} updates = {:.1} per update (budget {:.1})",
            w.leaf_visits, w.updates, w.per_update, w.budget
        ),
    )
}

fn plane_equivalence() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, (p, q)) in [(1, 2), (1, 10)].into_iter().enumerate() {
        let alpha = Rational::new(p, q);
        let r = fuzz_2d(&Fuzz2D {
            seed: 200 + i as u64,
            alpha,
            ..Fuzz2D::default()
        });
        passed &= r.ok() && r.elapsed < Duration::from_secs(120);
        parts.push(format!(
            "alpha={alpha}: {} rectangles, {} mismatches, {} audit failures, {}",
            r.queries,
            r.mismatches,
            r.audit_failures,
            secs(r.elapsed)
        ));
        if !r.ok() {
            show_failures(&r);
        }
    }
    outcome(passed, parts.join("; "))
}

fn dynamic_array() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, (p, q)) in [(1, 4), (1, 10)].into_iter().enumerate() {
        let alpha = Rational::new(p, q);
        let r = fuzz_array(&FuzzArray {
            seed: 300 + i as u64,
            alpha,
            ..FuzzArray::default()
        });
        passed &= r.ok() && r.relabel.relabels > 0;
        parts.push(format!(
            "alpha={alpha}: {} queries, {} mismatches, {} audit failures, {} relabels moving {} keys",
            r.queries, r.mismatches, r.audit_failures, r.relabel.relabels, r.relabel.moved_keys
        ));
        if !r.ok() {
            show_failures(&r);
        }
    }
    outcome(passed, parts.join("; "))
}

fn scaling() -> Outcome {
    let alpha = Rational::new(1, 10);
    let mut medians = Vec::new();
    for n in [10_000usize, 1_000_000] {
        let mut index = random_int_index(10, n, alpha);
        query_latency(&mut index, 1, 500);
        let (p50, _) = query_latency(&mut index, 2, 5_000);
        medians.push(p50);
    }
    let ratio = medians[1].as_secs_f64() / medians[0].as_secs_f64().max(1e-9);
    outcome(
        ratio <= 5.0,
        format!("median {:?} at n=1e4, {:?} at n=1e6, ratio {ratio:.2}", medians[0], medians[1]),
    )
}

fn main() -> ExitCode {
    let runs = one_dimensional_runs();
    let criteria: Vec<Criterion> = vec![
        ("1-D oracle equivalence", Box::new(|| oracle_equivalence(&runs))),
        ("mass bounds on general queries", Box::new(|| mass_bounds(&runs))),
        ("exhaustive Gamma bound", Box::new(gamma_bound)),
        ("candidate list rebuild laziness", Box::new(rebuild_laziness)),
        ("weight-balance audit", Box::new(|| weight_balance(&runs))),
        ("findtop equivalence and LCA cost", Box::new(findtop_equivalence)),
        ("amortized rebuild work", Box::new(amortized_rebuilds)),
        ("2-D oracle equivalence", Box::new(plane_equivalence)),
        ("dynamic array", Box::new(dynamic_array)),
        ("query latency scaling", Box::new(scaling)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += !o.passed as usize;
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
