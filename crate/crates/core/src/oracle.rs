//! Brute-force reference implementations used by the tests and the
//! self-test. Nothing here calls into the production query paths.

use std::collections::{BTreeMap, HashMap};

use crate::params::Rational;
use crate::tree::{MajorityTree, NodeId, NodeRef};
use crate::Coordinate;

fn over(count: u64, alpha: Rational, m: u64) -> bool {
    (count as u128) * (*alpha.denom() as u128) > (*alpha.numer() as u128) * (m as u128)
}

fn majorities<'a, L: Ord + Clone + 'a>(
    colours: impl Iterator<Item = &'a L>,
    alpha: Rational,
) -> Vec<L> {
    let mut tally: BTreeMap<&L, u64> = BTreeMap::new();
    let mut m = 0;
    for c in colours {
        *tally.entry(c).or_default() += 1;
        m += 1;
    }
    tally
        .into_iter()
        .filter(|&(_, n)| over(n, alpha, m))
        .map(|(c, _)| c.clone())
        .collect()
}

/// α-majorities of the records with coordinate in `[lo, hi]`, by linear
/// scan, in label order.
pub fn naive_majority<K: Ord, L: Ord + Clone>(records: &[(K, L)], lo: &K, hi: &K, alpha: Rational) -> Vec<L> {
    majorities(
        records.iter().filter(|(k, _)| lo <= k && k <= hi).map(|(_, c)| c),
        alpha,
    )
}

/// α-majorities of the records inside `[x_lo, x_hi] × [y_lo, y_hi]`.
pub fn naive_majority_2d<X: Ord, Y: Ord, L: Ord + Clone>(
    records: &[((X, Y), L)],
    x: (&X, &X),
    y: (&Y, &Y),
    alpha: Rational,
) -> Vec<L> {
    majorities(
        records
            .iter()
            .filter(|((px, py), _)| x.0 <= px && px <= x.1 && y.0 <= py && py <= y.1)
            .map(|(_, c)| c),
        alpha,
    )
}

/// α-majorities of `array[i..=j]` with 1-based positions.
pub fn naive_array_majority<L: Ord + Clone>(array: &[L], i: usize, j: usize, alpha: Rational) -> Vec<L> {
    majorities(array[i - 1..j].iter(), alpha)
}

/// Fewest insertions plus deletions, each at most `cap`, after which a
/// colour with `m` of `ell` points holds more than a `beta` fraction.
/// `None` when no such pair exists within the cap.
pub fn naive_gamma(ell: u64, m: u64, beta: Rational, cap: u64) -> Option<u64> {
    let (p, q) = (*beta.numer() as i128, *beta.denom() as i128);
    let mut best: Option<u64> = None;
    for ins in 0..=cap {
        for del in 0..=cap {
            let total = ell as i128 + ins as i128 - del as i128;
            if total < 1 {
                continue;
            }
            if (m as i128 + ins as i128) * q > p * total {
                let cost = ins + del;
                if best.is_none_or(|b| cost < b) {
                    best = Some(cost);
                }
            }
        }
    }
    best
}

/// Default search cap for [`naive_gamma`].
pub fn gamma_cap(ell: u64) -> u64 {
    3 * ell
}

/// Coordinate ranges of every node, computed bottom-up from the leaves.
fn node_ranges<K: Coordinate>(tree: &MajorityTree<K>) -> HashMap<NodeRef, (K, K)> {
    let mut ranges: HashMap<NodeRef, (K, K)> = HashMap::new();
    for leaf in tree.leaves_in_order() {
        let key = tree.leaf_key(leaf);
        let mut node = NodeRef::Leaf(leaf);
        loop {
            let r = ranges.entry(node).or_insert((key, key));
            r.0 = r.0.min(key);
            r.1 = r.1.max(key);
            match tree.parent(node) {
                Some(p) => node = NodeRef::Inner(p),
                None => break,
            }
        }
    }
    ranges
}

/// Maximal nodes inside `[lo, hi]`: from each leaf in range, climb while
/// the parent still lies inside. Sorted by handle.
pub fn naive_decompose<K: Coordinate>(tree: &MajorityTree<K>, lo: &K, hi: &K) -> Vec<NodeRef> {
    let ranges = node_ranges(tree);
    let inside = |n: &NodeRef| {
        let (a, b) = ranges[n];
        *lo <= a && b <= *hi
    };
    let mut out = Vec::new();
    for leaf in tree.leaves_in_order() {
        let key = tree.leaf_key(leaf);
        if key < *lo || key > *hi {
            continue;
        }
        let mut node = NodeRef::Leaf(leaf);
        while let Some(p) = tree.parent(node) {
            if !inside(&NodeRef::Inner(p)) {
                break;
            }
            node = NodeRef::Inner(p);
        }
        out.push(node);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Lowest common ancestor by comparing the two root paths.
pub fn naive_lca<K: Coordinate>(tree: &MajorityTree<K>, a: NodeRef, b: NodeRef) -> Option<NodeId> {
    let path = |mut n: NodeRef| {
        let mut p = vec![n];
        while let Some(up) = tree.parent(n) {
            n = NodeRef::Inner(up);
            p.push(n);
        }
        p.reverse();
        p
    };
    let (pa, pb) = (path(a), path(b));
    let mut last = None;
    for (x, y) in pa.iter().zip(&pb) {
        if x != y {
            break;
        }
        if let NodeRef::Inner(v) = x {
            last = Some(*v);
        }
    }
    last
}

/// Flat record store answering exact queries, with per-colour sorted
/// coordinate lists for fast colour counting.
#[derive(Debug, Clone)]
pub struct NaiveStore<K, L> {
    records: Vec<(K, usize)>,
    labels: Vec<L>,
    label_ids: BTreeMap<L, usize>,
    by_colour: Vec<Vec<K>>,
    tally: Vec<u64>,
}

impl<K: Ord + Copy, L: Ord + Clone> Default for NaiveStore<K, L> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Ord + Copy, L: Ord + Clone> NaiveStore<K, L> {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
            labels: Vec::new(),
            label_ids: BTreeMap::new(),
            by_colour: Vec::new(),
            tally: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn label_id(&mut self, label: L) -> usize {
        if let Some(&id) = self.label_ids.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.clone());
        self.label_ids.insert(label, id);
        self.by_colour.push(Vec::new());
        self.tally.push(0);
        id
    }

    fn position(&self, key: &K) -> Result<usize, usize> {
        self.records.binary_search_by(|(k, _)| k.cmp(key))
    }

    /// Adds a record; `false` if the coordinate is taken.
    pub fn insert(&mut self, key: K, label: L) -> bool {
        let Err(pos) = self.position(&key) else {
            return false;
        };
        let id = self.label_id(label);
        self.records.insert(pos, (key, id));
        let list = &mut self.by_colour[id];
        let at = list.partition_point(|k| *k < key);
        list.insert(at, key);
        true
    }

    pub fn remove(&mut self, key: &K) -> Option<L> {
        let pos = self.position(key).ok()?;
        let (_, id) = self.records.remove(pos);
        let list = &mut self.by_colour[id];
        let at = list.partition_point(|k| k < key);
        list.remove(at);
        Some(self.labels[id].clone())
    }

    pub fn contains(&self, key: &K) -> bool {
        self.position(key).is_ok()
    }

    pub fn get(&self, key: &K) -> Option<&L> {
        self.position(key).ok().map(|p| &self.labels[self.records[p].1])
    }

    /// The `rank`-th smallest coordinate, 0-based.
    pub fn key_at(&self, rank: usize) -> Option<K> {
        self.records.get(rank).map(|r| r.0)
    }

    pub fn records(&self) -> Vec<(K, L)> {
        self.records.iter().map(|&(k, id)| (k, self.labels[id].clone())).collect()
    }

    /// Points in `[lo, hi]`.
    pub fn count(&self, lo: &K, hi: &K) -> u64 {
        if lo > hi {
            return 0;
        }
        let a = self.records.partition_point(|(k, _)| k < lo);
        let b = self.records.partition_point(|(k, _)| k <= hi);
        (b - a) as u64
    }

    /// Points of colour `label` in `[lo, hi]`.
    pub fn count_colour(&self, label: &L, lo: &K, hi: &K) -> u64 {
        let Some(&id) = self.label_ids.get(label) else {
            return 0;
        };
        let list = &self.by_colour[id];
        if lo > hi {
            return 0;
        }
        (list.partition_point(|k| k <= hi) - list.partition_point(|k| k < lo)) as u64
    }

    /// Labels ever seen, including those with no remaining points.
    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    /// α-majorities of `[lo, hi]` with their counts, by scanning the range;
    /// returns `m` and the colours in label order.
    pub fn majority(&mut self, lo: &K, hi: &K, alpha: Rational) -> (u64, Vec<(L, u64)>) {
        if lo > hi {
            return (0, Vec::new());
        }
        let a = self.records.partition_point(|(k, _)| k < lo);
        let b = self.records.partition_point(|(k, _)| k <= hi);
        let mut touched = Vec::new();
        for &(_, id) in &self.records[a..b] {
            if self.tally[id] == 0 {
                touched.push(id);
            }
            self.tally[id] += 1;
        }
        let m = (b - a) as u64;
        let mut out = Vec::new();
        for id in touched {
            let n = std::mem::take(&mut self.tally[id]);
            if over(n, alpha, m) {
                out.push((self.labels[id].clone(), n));
            }
        }
        out.sort_by(|x, y| x.0.cmp(&y.0));
        (m, out)
    }
}
