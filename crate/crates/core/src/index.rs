//! One-dimensional dynamic range α-majority index.

use std::fmt::Debug;

use crate::colours::{ColourId, ColourRegistry, Remap};
use crate::coord::Coordinate;
use crate::counted::CountedSet;
use crate::error::{Error, Result};
use crate::params::{self, AlphaConfig, Rational};
use crate::tree::{CanonicalSet, MajorityTree, NodeId, NodeRef};

/// A reported colour with its exact count in the query range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reported<L> {
    pub colour: L,
    pub count: u64,
}

/// Answer to a range query: the number of points `m` in the range and every
/// colour owning more than `alpha · m` of them, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAnswer<L> {
    pub m: u64,
    pub colours: Vec<Reported<L>>,
}

impl<L: Clone + Ord> QueryAnswer<L> {
    /// Reported colours in label order.
    pub fn labels(&self) -> Vec<L> {
        let mut v: Vec<L> = self.colours.iter().map(|r| r.colour.clone()).collect();
        v.sort();
        v
    }
}

/// Intermediate state of one query, for instrumentation.
#[derive(Debug, Clone)]
pub struct QueryTrace<K> {
    /// Range after snapping to stored coordinates.
    pub snapped: Option<(K, K)>,
    pub m: u64,
    /// Full canonical decomposition of the snapped range.
    pub canonical: CanonicalSet,
    /// The part of it whose candidates are inspected.
    pub inspected: CanonicalSet,
    /// Colours passing the scratch filter, with their accumulated totals.
    pub survivors: Vec<(ColourId, u64)>,
    /// Verified colours with exact counts.
    pub reported: Vec<(ColourId, u64)>,
}

#[derive(Debug, Clone)]
pub struct MajorityIndex<K, L> {
    config: AlphaConfig,
    tree: MajorityTree<K>,
    all: CountedSet<K>,
    per_colour: Vec<CountedSet<K>>,
    registry: ColourRegistry<L>,
}

impl<K: Coordinate, L: Ord + Clone + Debug> MajorityIndex<K, L> {
    pub fn new(config: AlphaConfig) -> Self {
        Self {
            config,
            tree: MajorityTree::new(config),
            all: K::counted_set(),
            per_colour: vec![K::counted_set()],
            registry: ColourRegistry::new(),
        }
    }

    pub fn with_alpha(alpha: Rational) -> Result<Self> {
        Ok(Self::new(AlphaConfig::new(alpha)?))
    }

    /// Bulk construction; coordinates must be pairwise distinct.
    pub fn build(config: AlphaConfig, mut points: Vec<(K, L)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateKey);
        }
        let mut index = Self::new(config);
        let ids: Vec<(K, ColourId)> = points
            .into_iter()
            .map(|(k, label)| (k, index.registry.intern(label)))
            .collect();
        index.tree = MajorityTree::from_sorted(config, &ids, &mut index.registry.scratch)?;
        index.all = CountedSet::from_sorted(K::SET_FANOUT, ids.iter().map(|p| p.0));
        let mut buckets: Vec<Vec<K>> = vec![Vec::new(); index.registry.capacity() + 1];
        for &(k, c) in &ids {
            buckets[c.index()].push(k);
        }
        index.per_colour = buckets
            .into_iter()
            .map(|keys| CountedSet::from_sorted(K::SET_FANOUT, keys))
            .collect();
        Ok(index)
    }

    pub fn config(&self) -> &AlphaConfig {
        &self.config
    }

    pub fn alpha(&self) -> Rational {
        self.config.alpha
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn tree(&self) -> &MajorityTree<K> {
        &self.tree
    }

    pub fn registry(&self) -> &ColourRegistry<L> {
        &self.registry
    }

    pub fn contains(&self, key: &K) -> bool {
        self.tree.contains(key)
    }

    pub fn colour_at(&self, key: &K) -> Option<&L> {
        self.tree.colour_of(key).and_then(|c| self.registry.label(c))
    }

    /// The `rank`-th smallest coordinate, 0-based.
    pub fn select(&self, rank: usize) -> Option<K> {
        self.all.select(rank)
    }

    /// `(coordinate, label)` pairs in coordinate order.
    pub fn points(&self) -> Vec<(K, L)> {
        self.tree
            .points()
            .into_iter()
            .map(|(k, c)| (k, self.label_of(c).clone()))
            .collect()
    }

    fn label_of(&self, id: ColourId) -> &L {
        self.registry.label(id).expect("stored colour is registered")
    }

    pub fn insert(&mut self, key: K, label: L) -> Result<()> {
        if self.tree.contains(&key) {
            return Err(Error::DuplicateKey);
        }
        let id = self.registry.intern(label);
        if self.per_colour.len() <= id.index() {
            self.per_colour.resize_with(id.index() + 1, K::counted_set);
        }
        self.tree.insert(key, id, &mut self.registry.scratch)?;
        self.all.insert(key);
        self.per_colour[id.index()].insert(key);
        Ok(())
    }

    /// Removes the point at `key` and returns its colour.
    pub fn delete(&mut self, key: &K) -> Result<L> {
        let id = self.tree.delete(key, &mut self.registry.scratch)?;
        self.all.remove(key)?;
        self.per_colour[id.index()].remove(key)?;
        let label = self.label_of(id).clone();
        if let Some(map) = self.registry.release(id)? {
            self.apply_remap(&map);
        }
        Ok(label)
    }

    fn apply_remap(&mut self, map: &Remap) {
        self.tree.apply_remap(map);
        map.permute(&mut self.per_colour, self.registry.capacity() + 1);
    }

    /// Replaces coordinates without touching colour registrations: every
    /// old key is removed first, then every new key inserted with the
    /// colour it had.
    pub(crate) fn move_keys(&mut self, moves: &[(K, K)]) -> Result<()> {
        let mut ids = Vec::with_capacity(moves.len());
        for (old, _) in moves {
            let id = self.tree.delete(old, &mut self.registry.scratch)?;
            self.all.remove(old)?;
            self.per_colour[id.index()].remove(old)?;
            ids.push(id);
        }
        for ((_, new), id) in moves.iter().zip(ids) {
            self.tree.insert(*new, id, &mut self.registry.scratch)?;
            self.all.insert(*new);
            self.per_colour[id.index()].insert(*new);
        }
        Ok(())
    }

    /// Successor of `lo` and predecessor of `hi` among stored coordinates.
    pub fn snap(&self, lo: &K, hi: &K) -> Option<(K, K)> {
        if lo > hi {
            return None;
        }
        let a = self.all.successor(lo)?;
        let b = self.all.predecessor(hi)?;
        (a <= b).then_some((a, b))
    }

    /// Canonical decomposition of the snapped form of `[lo, hi]`.
    pub fn decompose(&self, lo: &K, hi: &K) -> Result<CanonicalSet> {
        let (a, b) = self.snap(lo, hi).ok_or(Error::NotGeneral)?;
        self.tree.decompose(&a, &b)
    }

    /// Number of points with coordinate in `[lo, hi]`.
    pub fn count(&self, lo: &K, hi: &K) -> u64 {
        self.all.count_range(lo, hi) as u64
    }

    /// Number of points of colour `label` in `[lo, hi]`.
    pub fn count_colour(&self, label: &L, lo: &K, hi: &K) -> u64 {
        self.registry
            .lookup(label)
            .map_or(0, |c| self.per_colour[c.index()].count_range(lo, hi) as u64)
    }

    /// Colours of more than an `alpha` fraction of the points in `[lo, hi]`,
    /// in label order.
    pub fn query(&mut self, lo: &K, hi: &K) -> Result<Vec<L>> {
        Ok(self.query_counts(lo, hi)?.labels())
    }

    pub fn query_counts(&mut self, lo: &K, hi: &K) -> Result<QueryAnswer<L>> {
        if lo > hi {
            return Err(Error::Precondition("range lower end exceeds upper end".into()));
        }
        let Some((a, b)) = self.snap(lo, hi) else {
            return Ok(QueryAnswer { m: 0, colours: Vec::new() });
        };
        let m = self.all.count_range(&a, &b) as u64;
        self.tree.gather(&a, &b, &mut self.registry.scratch);
        let survivors = self.registry.scratch.drain();
        let reported = self.verify(&a, &b, m, survivors.iter().copied());
        Ok(self.answer(m, reported))
    }

    /// Like [`Self::query_counts`], also returning the intermediate state.
    pub fn query_traced(&mut self, lo: &K, hi: &K) -> Result<(QueryAnswer<L>, QueryTrace<K>)> {
        if lo > hi {
            return Err(Error::Precondition("range lower end exceeds upper end".into()));
        }
        let mut trace = QueryTrace {
            snapped: None,
            m: 0,
            canonical: CanonicalSet::default(),
            inspected: CanonicalSet::default(),
            survivors: Vec::new(),
            reported: Vec::new(),
        };
        let Some((a, b)) = self.snap(lo, hi) else {
            return Ok((QueryAnswer { m: 0, colours: Vec::new() }, trace));
        };
        let m = self.all.count_range(&a, &b) as u64;
        trace.snapped = Some((a, b));
        trace.m = m;
        trace.canonical = self.tree.canonical(&a, &b);
        trace.inspected = self.tree.top_nodes(&a, &b, self.config.top_levels as usize);
        for c in &trace.inspected.nodes {
            self.tree.bump_node(c.node, &mut self.registry.scratch);
        }
        let alpha = self.config.alpha;
        trace.survivors = self
            .registry
            .scratch
            .drain()
            .into_iter()
            .filter(|&(_, total)| params::passes_filter(total, alpha, m))
            .collect();
        trace.survivors.sort_unstable();
        let reported = self.verify(&a, &b, m, trace.survivors.iter().copied());
        trace.reported = reported.clone();
        Ok((self.answer(m, reported), trace))
    }

    fn verify(
        &self,
        a: &K,
        b: &K,
        m: u64,
        totals: impl Iterator<Item = (ColourId, u64)>,
    ) -> Vec<(ColourId, u64)> {
        let alpha = self.config.alpha;
        totals
            .filter(|&(_, total)| params::passes_filter(total, alpha, m))
            .filter_map(|(c, _)| {
                let count = self.per_colour[c.index()].count_range(a, b) as u64;
                params::exceeds(count, alpha, m).then_some((c, count))
            })
            .collect()
    }

    fn answer(&self, m: u64, reported: Vec<(ColourId, u64)>) -> QueryAnswer<L> {
        let mut colours: Vec<Reported<L>> = reported
            .into_iter()
            .map(|(c, count)| Reported {
                colour: self.label_of(c).clone(),
                count,
            })
            .collect();
        colours.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.colour.cmp(&y.colour)));
        QueryAnswer { m, colours }
    }

    /// Exact α-majorities of `[lo, hi]` restricted to the leaves of a node
    /// without a candidate list, found by counting leaf colours.
    pub fn scan_pruned(&mut self, node: NodeId, lo: &K, hi: &K) -> Result<Vec<L>> {
        if self.tree.candidates(node).is_some() {
            return Err(Error::Precondition("node keeps a candidate list".into()));
        }
        let mut m = 0u64;
        for leaf in self.tree.leaves_below(NodeRef::Inner(node)) {
            let key = self.tree.leaf_key(leaf);
            if *lo <= key && key <= *hi {
                self.registry.scratch.bump(self.tree.leaf_colour(leaf), 1);
                m += 1;
            }
        }
        let alpha = self.config.alpha;
        let mut out: Vec<L> = self
            .registry
            .scratch
            .drain()
            .into_iter()
            .filter(|&(_, count)| params::exceeds(count, alpha, m))
            .map(|(c, _)| self.label_of(c).clone())
            .collect();
        out.sort();
        Ok(out)
    }

    /// Structural audit of the tree, the counting layers and the registry.
    pub fn audit(&self) -> std::result::Result<(), String> {
        self.tree.audit()?;
        self.registry.check_invariants()?;
        if !self.registry.scratch().all_zero() {
            return Err("scratch counters not reset".into());
        }
        if self.all.len() != self.tree.len() || self.registry.point_count() != self.tree.len() {
            return Err("point counts disagree".into());
        }
        let total: usize = self.per_colour.iter().map(CountedSet::len).sum();
        if total != self.all.len() {
            return Err("per-colour sets do not sum to the point count".into());
        }
        for (k, c) in self.tree.points() {
            if !self.per_colour[c.index()].contains(&k) || !self.all.contains(&k) {
                return Err(format!("point {k:?} missing from a counting layer"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(p: u64, q: u64) -> MajorityIndex<i64, &'static str> {
        MajorityIndex::with_alpha(Rational::new(p, q)).unwrap()
    }

    #[test]
    fn small_examples() {
        let cfg = AlphaConfig::new(Rational::new(1, 2)).unwrap();
        let mut empty: MajorityIndex<i64, &str> = MajorityIndex::build(cfg, vec![]).unwrap();
        assert!(empty.query(&0, &100).unwrap().is_empty());

        let mut ix = MajorityIndex::build(cfg, vec![(1, "r"), (2, "b"), (3, "r")]).unwrap();
        assert_eq!(ix.query(&1, &3).unwrap(), vec!["r"]);
        assert_eq!(ix.tree().node_weight(ix.tree().root().unwrap()), 3);
        assert!(ix.query(&10, &20).unwrap().is_empty());
        assert_eq!(ix.query(&2, &2).unwrap(), vec!["b"]);
        assert!(ix.query(&3, &1).is_err());

        let mut two = MajorityIndex::build(cfg, vec![(1, "r"), (2, "b")]).unwrap();
        assert!(two.query(&1, &2).unwrap().is_empty());

        assert_eq!(
            MajorityIndex::build(cfg, vec![(1, "r"), (1, "b")]).err(),
            Some(Error::DuplicateKey)
        );
    }

    #[test]
    fn insert_delete_round_trip() {
        let mut ix = index(1, 2);
        ix.insert(4, "x").unwrap();
        assert_eq!(ix.query(&4, &4).unwrap(), vec!["x"]);
        assert_eq!(ix.insert(4, "y"), Err(Error::DuplicateKey));
        assert_eq!(ix.delete(&4), Ok("x"));
        assert_eq!(ix.delete(&4), Err(Error::NotFound));
        assert!(ix.is_empty());
        ix.audit().unwrap();
    }

    #[test]
    fn snap_examples() {
        let cfg = AlphaConfig::new(Rational::new(1, 2)).unwrap();
        let ix = MajorityIndex::build(cfg, vec![(1, 'a'), (5, 'b'), (9, 'c')]).unwrap();
        assert_eq!(ix.snap(&2, &8), Some((5, 5)));
        assert_eq!(ix.snap(&1, &9), Some((1, 9)));
        assert_eq!(ix.snap(&6, &8), None);
    }

    #[test]
    fn counts_and_fractions() {
        let mut ix = index(1, 3);
        for k in 0..30 {
            ix.insert(k, if k % 3 == 0 { "a" } else if k < 20 { "b" } else { "c" }).unwrap();
        }
        let ans = ix.query_counts(&0, &29).unwrap();
        assert_eq!(ans.m, 30);
        assert_eq!(ans.colours, vec![Reported { colour: "b", count: 13 }]);
        let ans = ix.query_counts(&20, &29).unwrap();
        assert_eq!(ans.colours, vec![Reported { colour: "c", count: 7 }]);
        let ans = ix.query_counts(&18, &23).unwrap();
        assert_eq!(ans.colours, vec![Reported { colour: "c", count: 3 }]);
    }

    #[test]
    fn remap_keeps_labels() {
        let mut ix: MajorityIndex<i64, u32> = MajorityIndex::with_alpha(Rational::new(1, 4)).unwrap();
        for k in 0..1000 {
            ix.insert(k, k as u32).unwrap();
        }
        for k in 0..900 {
            assert_eq!(ix.delete(&k), Ok(k as u32));
        }
        assert!(ix.registry().remap_count() > 0);
        assert!(ix.registry().capacity() <= 200);
        ix.audit().unwrap();
        for (k, label) in ix.points() {
            assert_eq!(label as i64, k);
        }
        assert_eq!(ix.query(&950, &950).unwrap(), vec![950]);
    }

    #[test]
    fn scan_pruned_counts_leaves() {
        let cfg = AlphaConfig::new(Rational::new(1, 2)).unwrap();
        let mut ix = MajorityIndex::build(cfg, vec![(1, "r"), (2, "b"), (3, "r")]).unwrap();
        let Some(NodeRef::Inner(root)) = ix.tree().root() else { unreachable!() };
        assert_eq!(ix.scan_pruned(root, &1, &3).unwrap(), vec!["r"]);
        assert_eq!(ix.scan_pruned(root, &2, &2).unwrap(), vec!["b"]);
        assert!(ix.scan_pruned(root, &5, &9).unwrap().is_empty());
    }
}
