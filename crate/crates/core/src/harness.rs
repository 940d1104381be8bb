//! Randomised drivers that replay operation mixes against an index and the
//! brute-force oracle side by side, checking every answer and the
//! query-time mass bounds. Shared by the self-test command and the
//! acceptance suite.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::coord::Coordinate;
use crate::dynarray::{MajorityArray, RelabelStats};
use crate::index::{MajorityIndex, QueryTrace};
use crate::multidim::MajorityIndex2D;
use crate::oracle::{naive_array_majority, naive_majority, naive_majority_2d, NaiveStore};
use crate::params::{AlphaConfig, Rational};
use crate::tree::NodeRef;

/// Failure messages kept per report.
const KEPT_FAILURES: usize = 20;

/// Skewed colour labels `0..colours`.
#[derive(Debug, Clone)]
pub struct ColourSampler {
    zipf: Zipf<f64>,
}

impl ColourSampler {
    pub fn new(colours: u64, exponent: f64) -> Self {
        Self {
            zipf: Zipf::new(colours as f64, exponent).expect("valid zipf parameters"),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.zipf.sample(rng) as u32 - 1
    }
}

/// Violations of the per-query mass bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundTally {
    /// General queries checked.
    pub checked: u64,
    /// Mass at the j-th highest canonical height reached `m · min(1, 31 · 8^(1-j))`.
    pub level_mass: u64,
    /// Mass of a colour in canonical nodes not listing it reached `2.56 m / (k + 1)`.
    pub unlisted_mass: u64,
    /// Mass below the inspected heights reached `alpha · m / 2`.
    pub below_top: u64,
    /// More than `4 / alpha` colours passed the scratch filter.
    pub survivors: u64,
    /// General queries whose canonical nodes all share one height, so the
    /// top level holds exactly `m`.
    pub single_level: u64,
}

impl BoundTally {
    pub fn violations(&self) -> u64 {
        self.level_mass + self.unlisted_mass + self.below_top + self.survivors
    }
}

#[derive(Debug, Clone, Default)]
pub struct FuzzReport {
    pub inserts: u64,
    pub deletes: u64,
    pub modifies: u64,
    pub queries: u64,
    /// Queries whose range needs more than one canonical node.
    pub general_queries: u64,
    pub mismatches: u64,
    pub audit_failures: u64,
    pub bounds: BoundTally,
    pub relabel: RelabelStats,
    pub rebuild_leaf_visits: u64,
    /// Outcome of the weight-balance audit at the end of a 1-D run.
    pub final_balance: Option<Result<(), String>>,
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.audit_failures == 0 && self.bounds.violations() == 0
    }

    fn fail(&mut self, message: String) {
        if self.failures.len() < KEPT_FAILURES {
            self.failures.push(message);
        }
    }

    fn mismatch(&mut self, message: String) {
        self.mismatches += 1;
        self.fail(message);
    }

    fn audit(&mut self, when: &str, result: Result<(), String>) {
        if let Err(e) = result {
            self.audit_failures += 1;
            self.fail(format!("audit {when}: {e}"));
        }
    }
}

fn over(count: u64, alpha: Rational, m: u64, scale: (u64, u64)) -> bool {
    // count * scale.1 >= alpha * m * scale.0, i.e. the bound is *not* met.
    count as u128 * scale.1 as u128 * *alpha.denom() as u128
        >= *alpha.numer() as u128 * m as u128 * scale.0 as u128
}

/// Checks the mass bounds on one general query and updates `tally`.
pub fn check_bounds<K: Coordinate>(
    index: &MajorityIndex<K, u32>,
    trace: &QueryTrace<K>,
    oracle: &NaiveStore<K, u32>,
    tally: &mut BoundTally,
) -> Vec<String> {
    let mut problems = Vec::new();
    let config = index.config();
    let (alpha, m) = (config.alpha, trace.m);
    tally.checked += 1;

    let levels = trace.canonical.levels();
    tally.single_level += (levels.len() == 1) as u64;
    for (j, &h) in levels.iter().enumerate() {
        let level: u64 = trace
            .canonical
            .nodes
            .iter()
            .filter(|c| c.height == h)
            .map(|c| c.weight as u64)
            .sum();
        let j = j as u32 + 1;
        let within = if j <= 2 {
            level < m || (levels.len() == 1 && level == m)
        } else {
            8u128
                .checked_pow(j - 1)
                .is_some_and(|p| level as u128 * p < 31 * m as u128)
        };
        if !within {
            tally.level_mass += 1;
            problems.push(format!("level {j} (height {h}) holds {level} of m = {m}"));
        }
    }

    let below = trace.canonical.mass() - trace.inspected.mass();
    if over(below, alpha, m, (1, 2)) {
        tally.below_top += 1;
        problems.push(format!("mass {below} below the inspected heights, m = {m}"));
    }

    let tree = index.tree();
    let k = config.query_bound;
    for label in oracle.labels() {
        let Some(id) = index.registry().lookup(label) else {
            continue;
        };
        let mut unlisted = 0;
        for c in &trace.canonical.nodes {
            let NodeRef::Inner(v) = c.node else { continue };
            let Some(list) = tree.candidates(v) else { continue };
            if !list.iter().any(|e| e.colour == id) {
                let (lo, hi) = tree.range(c.node);
                unlisted += oracle.count_colour(label, &lo, &hi);
            }
        }
        if unlisted as u128 * (k as u128 + 1) * 100 >= 256 * m as u128 {
            tally.unlisted_mass += 1;
            problems.push(format!("colour {label} has {unlisted} unlisted of m = {m}"));
        }
    }

    if trace.survivors.len() as u128 * *alpha.numer() as u128 > 4 * *alpha.denom() as u128 {
        tally.survivors += 1;
        problems.push(format!("{} survivors", trace.survivors.len()));
    }
    problems
}

/// Parameters of a one-dimensional fuzz run.
#[derive(Debug, Clone)]
pub struct Fuzz1D {
    pub seed: u64,
    pub ops: usize,
    pub alpha: Rational,
    /// Coordinates are drawn from `0..=universe`.
    pub universe: u64,
    pub colours: u64,
    pub zipf: f64,
    pub insert_percent: u32,
    pub delete_percent: u32,
    /// Full audit period in operations (0 disables).
    pub audit_every: usize,
    /// Every this many queries the answer is also checked by linear scan.
    pub cross_check_every: u64,
    pub check_bounds: bool,
}

impl Default for Fuzz1D {
    fn default() -> Self {
        Self {
            seed: 1,
            ops: 10_000,
            alpha: Rational::new(1, 4),
            universe: 1_000_000,
            colours: 64,
            zipf: 1.2,
            insert_percent: 40,
            delete_percent: 20,
            audit_every: 5_000,
            cross_check_every: 64,
            check_bounds: true,
        }
    }
}

/// Replays a random operation mix on a one-dimensional index; `key` maps
/// drawn integers to coordinates.
pub fn fuzz_1d<K: Coordinate>(cfg: &Fuzz1D, key: impl Fn(u64) -> K) -> FuzzReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = ColourSampler::new(cfg.colours, cfg.zipf);
    let mut report = FuzzReport::default();
    let mut index: MajorityIndex<K, u32> = match MajorityIndex::with_alpha(cfg.alpha) {
        Ok(ix) => ix,
        Err(e) => {
            report.mismatch(format!("bad alpha: {e}"));
            return report;
        }
    };
    let mut oracle: NaiveStore<K, u32> = NaiveStore::new();

    for op in 0..cfg.ops {
        let roll = rng.random_range(0..100);
        if roll < cfg.insert_percent || oracle.is_empty() {
            report.inserts += 1;
            let x = key(rng.random_range(0..=cfg.universe));
            let c = sampler.sample(&mut rng);
            let fresh = !oracle.contains(&x);
            let done = index.insert(x, c).is_ok();
            if done != fresh {
                report.mismatch(format!("op {op}: insert {x:?} accepted = {done}, expected {fresh}"));
            }
            if fresh {
                oracle.insert(x, c);
            }
        } else if roll < cfg.insert_percent + cfg.delete_percent {
            report.deletes += 1;
            let x = oracle.key_at(rng.random_range(0..oracle.len())).expect("non-empty");
            let want = oracle.remove(&x);
            let got = index.delete(&x).ok();
            if got != want {
                report.mismatch(format!("op {op}: delete {x:?} gave {got:?}, expected {want:?}"));
            }
        } else {
            report.queries += 1;
            let (a, b) = (rng.random_range(0..=cfg.universe), rng.random_range(0..=cfg.universe));
            let (lo, hi) = (key(a.min(b)), key(a.max(b)));
            let (answer, trace) = match index.query_traced(&lo, &hi) {
                Ok(r) => r,
                Err(e) => {
                    report.mismatch(format!("op {op}: query failed: {e}"));
                    continue;
                }
            };
            let (m, want) = oracle.majority(&lo, &hi, cfg.alpha);
            let mut got: Vec<(u32, u64)> = answer.colours.iter().map(|r| (r.colour, r.count)).collect();
            got.sort_unstable();
            if answer.m != m || got != want {
                report.mismatch(format!(
                    "op {op}: query [{lo:?}, {hi:?}] gave m = {} {got:?}, expected m = {m} {want:?}",
                    answer.m
                ));
            }
            if cfg.cross_check_every > 0 && report.queries % cfg.cross_check_every == 0 {
                let scan = naive_majority(&oracle.records(), &lo, &hi, cfg.alpha);
                if scan != want.iter().map(|w| w.0).collect::<Vec<_>>() {
                    report.mismatch(format!("op {op}: oracle paths disagree on [{lo:?}, {hi:?}]"));
                }
            }
            if trace.canonical.len() >= 2 {
                report.general_queries += 1;
                if cfg.check_bounds {
                    for p in check_bounds(&index, &trace, &oracle, &mut report.bounds) {
                        report.fail(format!("op {op}: [{lo:?}, {hi:?}]: {p}"));
                    }
                }
            }
        }
        if cfg.audit_every > 0 && (op + 1) % cfg.audit_every == 0 {
            report.audit(&format!("after op {op}"), index.audit());
        }
    }
    report.audit("at end", index.audit());
    report.final_balance = Some(index.tree().audit_balance());
    report.rebuild_leaf_visits = index.tree().stats().rebuild_leaf_visits;
    report.elapsed = start.elapsed();
    report
}

/// Parameters of a two-dimensional fuzz run.
#[derive(Debug, Clone)]
pub struct Fuzz2D {
    pub seed: u64,
    pub initial: usize,
    pub ops: usize,
    pub query_percent: u32,
    pub alpha: Rational,
    /// Coordinates are drawn from `0..=side` on both axes.
    pub side: i64,
    pub colours: u64,
    pub zipf: f64,
    pub audit_every: usize,
}

impl Default for Fuzz2D {
    fn default() -> Self {
        Self {
            seed: 1,
            initial: 2_000,
            ops: 10_000,
            query_percent: 10,
            alpha: Rational::new(1, 2),
            side: 10_000,
            colours: 64,
            zipf: 1.2,
            audit_every: 2_500,
        }
    }
}

pub fn fuzz_2d(cfg: &Fuzz2D) -> FuzzReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = ColourSampler::new(cfg.colours, cfg.zipf);
    let mut report = FuzzReport::default();
    let Ok(config) = AlphaConfig::new(cfg.alpha) else {
        report.mismatch("bad alpha".into());
        return report;
    };
    let mut model: Vec<((i64, i64), u32)> = Vec::with_capacity(cfg.initial * 2);
    let mut seen = std::collections::HashSet::new();
    while model.len() < cfg.initial {
        let p = (rng.random_range(0..=cfg.side), rng.random_range(0..=cfg.side));
        if seen.insert(p) {
            model.push((p, sampler.sample(&mut rng)));
        }
    }
    let mut index: MajorityIndex2D<i64, i64, u32> = match MajorityIndex2D::build(config, model.clone()) {
        Ok(ix) => ix,
        Err(e) => {
            report.mismatch(format!("build failed: {e}"));
            return report;
        }
    };
    let insert_cut = (100 - cfg.query_percent) / 2;
    for op in 0..cfg.ops {
        let roll = rng.random_range(0..100);
        if roll < cfg.query_percent {
            report.queries += 1;
            let (a, b) = (rng.random_range(0..=cfg.side), rng.random_range(0..=cfg.side));
            let (c, d) = (rng.random_range(0..=cfg.side), rng.random_range(0..=cfg.side));
            let (x, y) = ((a.min(b), a.max(b)), (c.min(d), c.max(d)));
            let want = naive_majority_2d(&model, (&x.0, &x.1), (&y.0, &y.1), cfg.alpha);
            match index.query_traced((&x.0, &x.1), (&y.0, &y.1)) {
                Ok((answer, trace)) => {
                    if answer.labels() != want {
                        report.mismatch(format!("op {op}: rect {x:?} x {y:?} gave {:?}, expected {want:?}", answer.labels()));
                    }
                    report.bounds.checked += 1;
                    if trace.survivors as u128 * *cfg.alpha.numer() as u128 > 4 * *cfg.alpha.denom() as u128 {
                        report.bounds.survivors += 1;
                        report.fail(format!("op {op}: {} survivors", trace.survivors));
                    }
                }
                Err(e) => report.mismatch(format!("op {op}: query failed: {e}")),
            }
        } else if roll < cfg.query_percent + insert_cut || model.is_empty() {
            report.inserts += 1;
            let p = (rng.random_range(0..=cfg.side), rng.random_range(0..=cfg.side));
            let c = sampler.sample(&mut rng);
            let fresh = seen.insert(p);
            let done = index.insert(p, c).is_ok();
            if done != fresh {
                report.mismatch(format!("op {op}: insert {p:?} accepted = {done}, expected {fresh}"));
            }
            if fresh {
                model.push((p, c));
            }
        } else {
            report.deletes += 1;
            let (p, c) = model.swap_remove(rng.random_range(0..model.len()));
            seen.remove(&p);
            let got = index.delete(&p).ok();
            if got != Some(c) {
                report.mismatch(format!("op {op}: delete {p:?} gave {got:?}, expected {c}"));
            }
        }
        if cfg.audit_every > 0 && (op + 1) % cfg.audit_every == 0 {
            report.audit(&format!("after op {op}"), index.audit());
        }
    }
    report.audit("at end", index.audit());
    report.elapsed = start.elapsed();
    report
}

/// Parameters of a dynamic-array fuzz run.
#[derive(Debug, Clone)]
pub struct FuzzArray {
    pub seed: u64,
    pub ops: usize,
    pub alpha: Rational,
    pub colours: u64,
    pub zipf: f64,
    pub audit_every: usize,
}

impl Default for FuzzArray {
    fn default() -> Self {
        Self {
            seed: 1,
            ops: 50_000,
            alpha: Rational::new(1, 4),
            colours: 16,
            zipf: 1.2,
            audit_every: 2_500,
        }
    }
}

/// Random positional operations, a share of them inserting repeatedly at
/// the front or the middle so that label gaps are exhausted.
pub fn fuzz_array(cfg: &FuzzArray) -> FuzzReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = ColourSampler::new(cfg.colours, cfg.zipf);
    let mut report = FuzzReport::default();
    let mut array: MajorityArray<u32> = match MajorityArray::with_alpha(cfg.alpha) {
        Ok(a) => a,
        Err(e) => {
            report.mismatch(format!("bad alpha: {e}"));
            return report;
        }
    };
    let mut naive: Vec<u32> = Vec::new();
    for op in 0..cfg.ops {
        let roll = rng.random_range(0..100);
        let n = naive.len();
        if roll < 40 || n == 0 {
            report.inserts += 1;
            let pos = if roll < 8 {
                1
            } else if roll < 15 {
                n / 2 + 1
            } else {
                rng.random_range(1..=n + 1)
            };
            let c = sampler.sample(&mut rng);
            if let Err(e) = array.insert(pos, c) {
                report.mismatch(format!("op {op}: insert at {pos} failed: {e}"));
                continue;
            }
            naive.insert(pos - 1, c);
            let local: Vec<u64> = (pos.saturating_sub(1).max(1)..=(pos + 1).min(naive.len()))
                .filter_map(|p| array.label(p).ok())
                .collect();
            if local.windows(2).any(|w| w[0] >= w[1]) {
                report.audit_failures += 1;
                report.fail(format!("op {op}: labels around {pos} not increasing: {local:?}"));
            }
        } else if roll < 55 {
            report.deletes += 1;
            let pos = rng.random_range(1..=n);
            let got = array.delete(pos).ok();
            let want = naive.remove(pos - 1);
            if got != Some(want) {
                report.mismatch(format!("op {op}: delete {pos} gave {got:?}, expected {want}"));
            }
        } else if roll < 65 {
            report.modifies += 1;
            let pos = rng.random_range(1..=n);
            let c = sampler.sample(&mut rng);
            let got = array.modify(pos, c).ok();
            if got != Some(naive[pos - 1]) {
                report.mismatch(format!("op {op}: modify {pos} returned {got:?}"));
            }
            naive[pos - 1] = c;
        } else {
            report.queries += 1;
            let i = rng.random_range(1..=n);
            let j = rng.random_range(i..=n);
            let want = naive_array_majority(&naive, i, j, cfg.alpha);
            match array.query(i, j) {
                Ok(got) if got == want => {}
                Ok(got) => report.mismatch(format!("op {op}: query {i}..{j} gave {got:?}, expected {want:?}")),
                Err(e) => report.mismatch(format!("op {op}: query {i}..{j} failed: {e}")),
            }
        }
        if cfg.audit_every > 0 && (op + 1) % cfg.audit_every == 0 {
            report.audit(&format!("after op {op}"), array.audit());
            if array.to_vec() != naive {
                report.mismatch(format!("op {op}: array contents diverged"));
            }
        }
    }
    report.audit("at end", array.audit());
    report.relabel = array.stats();
    report.rebuild_leaf_visits = array.engine().tree().stats().rebuild_leaf_visits;
    report.elapsed = start.elapsed();
    report
}

/// Leaf visits spent rebuilding candidate lists over a run of updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebuildWork {
    pub updates: u64,
    pub leaf_visits: u64,
    pub per_update: f64,
    /// `50 · lg n / alpha` for the run's typical size.
    pub budget: f64,
}

/// Starting from `n` points, applies `updates` random inserts and deletes
/// (keeping the size near `n`) and measures list-rebuild work.
pub fn rebuild_work(seed: u64, n: usize, updates: u64, alpha: Rational) -> RebuildWork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ColourSampler::new(64, 1.2);
    let config = AlphaConfig::new(alpha).expect("valid alpha");
    let universe = 1_000_000_000i64;
    let mut keys: Vec<i64> = Vec::with_capacity(n * 2);
    let mut seen = std::collections::HashSet::new();
    while keys.len() < n {
        let k = rng.random_range(0..universe);
        if seen.insert(k) {
            keys.push(k);
        }
    }
    let points = keys.iter().map(|&k| (k, sampler.sample(&mut rng))).collect();
    let mut index: MajorityIndex<i64, u32> = MajorityIndex::build(config, points).expect("distinct keys");
    let before = index.tree().stats().rebuild_leaf_visits;
    for _ in 0..updates {
        if rng.random_bool(0.5) || keys.is_empty() {
            let k = rng.random_range(0..universe);
            if seen.insert(k) {
                index.insert(k, sampler.sample(&mut rng)).expect("fresh key");
                keys.push(k);
                continue;
            }
        }
        let k = keys.swap_remove(rng.random_range(0..keys.len()));
        seen.remove(&k);
        index.delete(&k).expect("stored key");
    }
    let leaf_visits = index.tree().stats().rebuild_leaf_visits - before;
    let alpha_f = *alpha.numer() as f64 / *alpha.denom() as f64;
    RebuildWork {
        updates,
        leaf_visits,
        per_update: leaf_visits as f64 / updates as f64,
        budget: 50.0 * (n as f64).log2() / alpha_f,
    }
}

/// Integer index over `n` random points with skewed colours.
pub fn random_int_index(seed: u64, n: usize, alpha: Rational) -> MajorityIndex<i64, u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = ColourSampler::new(64, 1.2);
    let points = (0..n as i64)
        .map(|i| (i * 1_000 + rng.random_range(0..1_000), sampler.sample(&mut rng)))
        .collect();
    MajorityIndex::build(AlphaConfig::new(alpha).expect("valid alpha"), points).expect("distinct keys")
}

/// Median and 99th-percentile latency of `queries` random range queries.
pub fn query_latency(index: &mut MajorityIndex<i64, u32>, seed: u64, queries: usize) -> (Duration, Duration) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = index.select(index.len().saturating_sub(1)).unwrap_or(0).max(1);
    let mut times = Vec::with_capacity(queries);
    for _ in 0..queries {
        let (a, b) = (rng.random_range(0..=span), rng.random_range(0..=span));
        let (lo, hi) = (a.min(b), a.max(b));
        let t = Instant::now();
        let answer = index.query_counts(&lo, &hi);
        times.push(t.elapsed());
        std::hint::black_box(answer.ok());
    }
    percentiles(&mut times)
}

/// Median and 99th percentile of a sample.
pub fn percentiles(times: &mut [Duration]) -> (Duration, Duration) {
    if times.is_empty() {
        return (Duration::ZERO, Duration::ZERO);
    }
    times.sort_unstable();
    let at = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize];
    (at(0.5), at(0.99))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coord::Real;

    #[test]
    fn small_integer_run_is_clean() {
        let cfg = Fuzz1D {
            ops: 3_000,
            universe: 5_000,
            audit_every: 500,
            ..Fuzz1D::default()
        };
        let report = fuzz_1d(&cfg, |x| x as i64);
        assert!(report.ok(), "{:#?}", report.failures);
        assert!(report.general_queries > 100);
    }

    #[test]
    fn small_real_run_is_clean() {
        let cfg = Fuzz1D {
            ops: 3_000,
            alpha: Rational::new(1, 10),
            universe: 5_000,
            audit_every: 500,
            ..Fuzz1D::default()
        };
        let report = fuzz_1d(&cfg, |x| Real::from(x as f64 / 7.0));
        assert!(report.ok(), "{:#?}", report.failures);
    }

    #[test]
    fn small_plane_and_array_runs_are_clean() {
        let plane = fuzz_2d(&Fuzz2D {
            initial: 200,
            ops: 1_000,
            side: 300,
            ..Fuzz2D::default()
        });
        assert!(plane.ok(), "{:#?}", plane.failures);
        let array = fuzz_array(&FuzzArray {
            ops: 3_000,
            audit_every: 500,
            ..FuzzArray::default()
        });
        assert!(array.ok(), "{:#?}", array.failures);
        assert!(array.relabel.relabels > 0);
    }

    #[test]
    fn sampler_covers_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = ColourSampler::new(4, 1.2);
        let drawn: std::collections::BTreeSet<u32> = (0..500).map(|_| s.sample(&mut rng)).collect();
        assert_eq!(drawn.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }
}
