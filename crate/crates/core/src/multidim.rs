//! Two-dimensional range α-majority index.
//!
//! Points are kept in a binary search tree ordered by `(x, y)`. Every node
//! carries a secondary structure over the points of its subtree keyed by
//! `(y, x)`: a [`MajorityTree`] for candidate collection, or a
//! [`CountedSet`] for rectangle counting. The primary tree is rebalanced by
//! rebuilding subtrees that drift out of weight balance; deletions leave
//! tombstones until they outnumber the live points.

use std::fmt::Debug;

use crate::colours::{ColourId, ColourRegistry, Remap, ScratchCounters};
use crate::coord::Coordinate;
use crate::counted::CountedSet;
use crate::error::{Error, Result};
use crate::params::{self, AlphaConfig, Rational};
use crate::index::{QueryAnswer, Reported};
use crate::tree::MajorityTree;

const NIL: u32 = u32::MAX;
/// A child may hold at most this fraction (in tenths) of its parent's nodes.
const BALANCE_TENTHS: u64 = 7;
/// Subtrees this small are never rebuilt for balance.
const REBUILD_FLOOR: u32 = 8;

/// Structure attached to each node of a [`RangeTree`], holding the points
/// of the node's subtree under the key `(y, x)`.
pub trait Secondary<K: Coordinate>: Sized {
    /// Construction parameters shared by every instance.
    type Proto: Copy;

    /// Builds from points sorted by key.
    fn build(proto: Self::Proto, points: &[(K, ColourId)], scratch: &mut ScratchCounters) -> Self;
    fn insert(&mut self, key: K, colour: ColourId, scratch: &mut ScratchCounters);
    fn remove(&mut self, key: &K, scratch: &mut ScratchCounters);
    fn keys(&self) -> Vec<K>;
    fn remap(&mut self, _map: &Remap) {}
}

impl<K: Coordinate> Secondary<K> for MajorityTree<K> {
    type Proto = AlphaConfig;

    fn build(proto: AlphaConfig, points: &[(K, ColourId)], scratch: &mut ScratchCounters) -> Self {
        MajorityTree::from_sorted(proto, points, scratch).expect("secondary keys are distinct")
    }

    fn insert(&mut self, key: K, colour: ColourId, scratch: &mut ScratchCounters) {
        MajorityTree::insert(self, key, colour, scratch).expect("secondary key absent");
    }

    fn remove(&mut self, key: &K, scratch: &mut ScratchCounters) {
        self.delete(key, scratch).expect("secondary key present");
    }

    fn keys(&self) -> Vec<K> {
        self.points().into_iter().map(|p| p.0).collect()
    }

    fn remap(&mut self, map: &Remap) {
        self.apply_remap(map);
    }
}

impl<K: Coordinate> Secondary<K> for CountedSet<K> {
    type Proto = ();

    fn build(_: (), points: &[(K, ColourId)], _: &mut ScratchCounters) -> Self {
        CountedSet::from_sorted(K::SET_FANOUT, points.iter().map(|p| p.0))
    }

    fn insert(&mut self, key: K, _: ColourId, _: &mut ScratchCounters) {
        CountedSet::insert(self, key);
    }

    fn remove(&mut self, key: &K, _: &mut ScratchCounters) {
        CountedSet::remove(self, key).expect("secondary key present");
    }

    fn keys(&self) -> Vec<K> {
        self.to_vec()
    }
}

/// Points keyed by `(y, x)` with their colours.
type Swapped<X, Y> = Vec<((Y, X), ColourId)>;

#[derive(Debug, Clone)]
struct XNode<X, Y, S> {
    point: (X, Y),
    colour: ColourId,
    live: bool,
    left: u32,
    right: u32,
    /// Nodes in the subtree, tombstones included.
    size: u32,
    sec: S,
}

/// A piece of an x-range decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    /// Every point under the node lies in the x-range.
    Whole(u32),
    /// Only the node's own point does.
    Single(u32),
}

/// Binary search tree over `(x, y)` with a secondary structure per node.
#[derive(Debug, Clone)]
pub struct RangeTree<X: Coordinate, Y: Coordinate, S: Secondary<(Y, X)>> {
    proto: S::Proto,
    nodes: Vec<XNode<X, Y, S>>,
    free: Vec<u32>,
    root: u32,
    live: usize,
    dead: usize,
    rebuilds: u64,
}

impl<X: Coordinate, Y: Coordinate, S: Secondary<(Y, X)>> RangeTree<X, Y, S> {
    pub fn new(proto: S::Proto) -> Self {
        Self {
            proto,
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            live: 0,
            dead: 0,
            rebuilds: 0,
        }
    }

    /// Builds from points with distinct `(x, y)`.
    pub fn build(proto: S::Proto, mut points: Vec<((X, Y), ColourId)>, scratch: &mut ScratchCounters) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateKey);
        }
        let mut tree = Self::new(proto);
        tree.live = points.len();
        tree.root = tree.build_balanced(&points, scratch).0;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Subtree rebuilds performed, global ones included.
    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    /// Edges on the longest root-to-node path of the primary tree.
    pub fn height(&self) -> u32 {
        let mut deepest = 0;
        let mut stack = vec![(self.root, 0)];
        while let Some((v, d)) = stack.pop() {
            if v == NIL {
                continue;
            }
            deepest = deepest.max(d);
            let n = &self.nodes[v as usize];
            stack.push((n.left, d + 1));
            stack.push((n.right, d + 1));
        }
        deepest
    }

    pub fn secondary(&self, v: u32) -> &S {
        &self.nodes[v as usize].sec
    }

    /// The node's own point, its colour, and whether it is live.
    pub fn point(&self, v: u32) -> ((X, Y), ColourId, bool) {
        let n = &self.nodes[v as usize];
        (n.point, n.colour, n.live)
    }

    fn size(&self, v: u32) -> u32 {
        if v == NIL {
            0
        } else {
            self.nodes[v as usize].size
        }
    }

    fn alloc(&mut self, node: XNode<X, Y, S>) -> u32 {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = node;
                id
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    /// Builds a perfectly balanced subtree over `points` (sorted by
    /// `(x, y)`); returns its root and its points sorted by `(y, x)`.
    fn build_balanced(
        &mut self,
        points: &[((X, Y), ColourId)],
        scratch: &mut ScratchCounters,
    ) -> (u32, Swapped<X, Y>) {
        if points.is_empty() {
            return (NIL, Vec::new());
        }
        let mid = points.len() / 2;
        let (left, lsorted) = self.build_balanced(&points[..mid], scratch);
        let (right, rsorted) = self.build_balanced(&points[mid + 1..], scratch);
        let ((x, y), colour) = points[mid];
        let mut sorted = Vec::with_capacity(points.len());
        let (mut i, mut j) = (0, 0);
        let mut own = Some(((y, x), colour));
        while i < lsorted.len() || j < rsorted.len() || own.is_some() {
            let mut best: Option<((Y, X), ColourId)> = None;
            let mut from = 0;
            for (src, cand) in [(0, lsorted.get(i).copied()), (1, rsorted.get(j).copied()), (2, own)] {
                if let Some(c) = cand {
                    if best.is_none_or(|b| c.0 < b.0) {
                        best = Some(c);
                        from = src;
                    }
                }
            }
            sorted.push(best.expect("some source non-empty"));
            match from {
                0 => i += 1,
                1 => j += 1,
                _ => own = None,
            }
        }
        let sec = S::build(self.proto, &sorted, scratch);
        let id = self.alloc(XNode {
            point: (x, y),
            colour,
            live: true,
            left,
            right,
            size: points.len() as u32,
            sec,
        });
        (id, sorted)
    }

    fn collect_live(&self, v: u32, out: &mut Vec<((X, Y), ColourId)>) {
        if v == NIL {
            return;
        }
        let n = &self.nodes[v as usize];
        self.collect_live(n.left, out);
        if n.live {
            out.push((n.point, n.colour));
        }
        self.collect_live(n.right, out);
    }

    fn release(&mut self, v: u32) {
        if v == NIL {
            return;
        }
        let (l, r) = (self.nodes[v as usize].left, self.nodes[v as usize].right);
        self.release(l);
        self.release(r);
        if !self.nodes[v as usize].live {
            self.dead -= 1;
        }
        self.free.push(v);
    }

    fn rebuild(&mut self, v: u32, scratch: &mut ScratchCounters) -> u32 {
        self.rebuilds += 1;
        let mut pts = Vec::new();
        self.collect_live(v, &mut pts);
        self.release(v);
        self.build_balanced(&pts, scratch).0
    }

    fn path_to(&self, p: &(X, Y)) -> (Vec<u32>, Option<u32>) {
        let mut path = Vec::new();
        let mut v = self.root;
        while v != NIL {
            let n = &self.nodes[v as usize];
            if *p == n.point {
                return (path, Some(v));
            }
            path.push(v);
            v = if *p < n.point { n.left } else { n.right };
        }
        (path, None)
    }

    pub fn insert(&mut self, p: (X, Y), colour: ColourId, scratch: &mut ScratchCounters) -> Result<()> {
        let (mut path, found) = self.path_to(&p);
        let key = (p.1, p.0);
        match found {
            Some(v) if self.nodes[v as usize].live => return Err(Error::DuplicateKey),
            Some(v) => {
                path.push(v);
                let n = &mut self.nodes[v as usize];
                n.live = true;
                n.colour = colour;
                self.dead -= 1;
                for &u in &path {
                    self.nodes[u as usize].sec.insert(key, colour, scratch);
                }
            }
            None => {
                for &u in &path {
                    self.nodes[u as usize].sec.insert(key, colour, scratch);
                    self.nodes[u as usize].size += 1;
                }
                let sec = S::build(self.proto, &[(key, colour)], scratch);
                let leaf = self.alloc(XNode {
                    point: p,
                    colour,
                    live: true,
                    left: NIL,
                    right: NIL,
                    size: 1,
                    sec,
                });
                match path.last() {
                    None => self.root = leaf,
                    Some(&parent) => {
                        let pn = &mut self.nodes[parent as usize];
                        if p < pn.point {
                            pn.left = leaf;
                        } else {
                            pn.right = leaf;
                        }
                    }
                }
                self.rebalance(&path, scratch);
            }
        }
        self.live += 1;
        Ok(())
    }

    /// Rebuilds the highest node on `path` with a too-heavy child.
    fn rebalance(&mut self, path: &[u32], scratch: &mut ScratchCounters) {
        for (depth, &v) in path.iter().enumerate() {
            let n = &self.nodes[v as usize];
            if n.size < REBUILD_FLOOR {
                break;
            }
            let heavy = self.size(n.left).max(self.size(n.right)) as u64;
            if 10 * heavy > BALANCE_TENTHS * n.size as u64 {
                let new = self.rebuild(v, scratch);
                self.replace_child(path.get(depth.wrapping_sub(1)).copied(), v, new);
                return;
            }
        }
    }

    fn replace_child(&mut self, parent: Option<u32>, old: u32, new: u32) {
        match parent {
            None => self.root = new,
            Some(p) => {
                let pn = &mut self.nodes[p as usize];
                if pn.left == old {
                    pn.left = new;
                } else {
                    pn.right = new;
                }
            }
        }
        // Sizes above the rebuilt node shrink by the tombstones it dropped.
        if let Some(p) = parent {
            self.refresh_sizes_to(p);
        }
    }

    fn refresh_sizes_to(&mut self, target: u32) {
        let p = self.nodes[target as usize].point;
        let mut path = Vec::new();
        let mut v = self.root;
        while v != NIL {
            path.push(v);
            if v == target {
                break;
            }
            let n = &self.nodes[v as usize];
            v = if p < n.point { n.left } else { n.right };
        }
        for &u in path.iter().rev() {
            let n = &self.nodes[u as usize];
            let size = 1 + self.size(n.left) + self.size(n.right);
            self.nodes[u as usize].size = size;
        }
    }

    /// Removes a live point and returns its colour.
    pub fn remove(&mut self, p: &(X, Y), scratch: &mut ScratchCounters) -> Result<ColourId> {
        let (mut path, found) = self.path_to(p);
        let v = match found {
            Some(v) if self.nodes[v as usize].live => v,
            _ => return Err(Error::NotFound),
        };
        path.push(v);
        let key = (p.1, p.0);
        for &u in &path {
            self.nodes[u as usize].sec.remove(&key, scratch);
        }
        let colour = self.nodes[v as usize].colour;
        self.nodes[v as usize].live = false;
        self.live -= 1;
        self.dead += 1;
        if self.dead > self.live {
            let root = self.root;
            self.root = self.rebuild(root, scratch);
        }
        Ok(colour)
    }

    /// Decomposes `[x_lo, x_hi]` into whole subtrees and single points.
    pub fn pieces(&self, x_lo: &X, x_hi: &X) -> Vec<Piece> {
        let mut out = Vec::new();
        if x_lo <= x_hi {
            let lo = (*x_lo, Y::MIN);
            let hi = (*x_hi, Y::MAX);
            self.pieces_rec(self.root, &lo, &hi, false, false, &mut out);
        }
        out
    }

    fn pieces_rec(&self, v: u32, lo: &(X, Y), hi: &(X, Y), min_ok: bool, max_ok: bool, out: &mut Vec<Piece>) {
        if v == NIL {
            return;
        }
        if min_ok && max_ok {
            out.push(Piece::Whole(v));
            return;
        }
        let n = &self.nodes[v as usize];
        if n.point < *lo {
            self.pieces_rec(n.right, lo, hi, min_ok, max_ok, out);
        } else if n.point > *hi {
            self.pieces_rec(n.left, lo, hi, min_ok, max_ok, out);
        } else {
            out.push(Piece::Single(v));
            self.pieces_rec(n.left, lo, hi, min_ok, true, out);
            self.pieces_rec(n.right, lo, hi, true, max_ok, out);
        }
    }

    pub fn apply_remap(&mut self, map: &Remap) {
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if v == NIL {
                continue;
            }
            let n = &mut self.nodes[v as usize];
            n.colour = map.get(n.colour).unwrap_or(ColourId(0));
            n.sec.remap(map);
            stack.push(n.left);
            stack.push(n.right);
        }
    }

    /// Live points sorted by `(x, y)`.
    pub fn points(&self) -> Vec<((X, Y), ColourId)> {
        let mut out = Vec::with_capacity(self.live);
        self.collect_live(self.root, &mut out);
        out
    }

    /// Number of secondary structures holding each live point, in `(x, y)`
    /// order.
    pub fn memberships(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.live);
        self.memberships_rec(self.root, 1, &mut out);
        out
    }

    fn memberships_rec(&self, v: u32, depth: usize, out: &mut Vec<usize>) {
        if v == NIL {
            return;
        }
        let n = &self.nodes[v as usize];
        self.memberships_rec(n.left, depth + 1, out);
        if n.live {
            out.push(depth);
        }
        self.memberships_rec(n.right, depth + 1, out);
    }

    /// Checks ordering, sizes, and that each secondary holds exactly the
    /// live points of its subtree.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut live = 0;
        let mut dead = 0;
        self.audit_rec(self.root, None, None, &mut live, &mut dead)?;
        if live != self.live || dead != self.dead {
            return Err(format!("counted {live} live / {dead} dead, recorded {} / {}", self.live, self.dead));
        }
        Ok(())
    }

    fn audit_rec(
        &self,
        v: u32,
        lo: Option<(X, Y)>,
        hi: Option<(X, Y)>,
        live: &mut usize,
        dead: &mut usize,
    ) -> std::result::Result<Vec<(Y, X)>, String> {
        if v == NIL {
            return Ok(Vec::new());
        }
        let n = &self.nodes[v as usize];
        if lo.is_some_and(|l| n.point <= l) || hi.is_some_and(|h| n.point >= h) {
            return Err(format!("point {:?} out of order", n.point));
        }
        let mut keys = self.audit_rec(n.left, lo, Some(n.point), live, dead)?;
        keys.extend(self.audit_rec(n.right, Some(n.point), hi, live, dead)?);
        if n.live {
            *live += 1;
            keys.push((n.point.1, n.point.0));
        } else {
            *dead += 1;
        }
        if n.size != 1 + self.size(n.left) + self.size(n.right) {
            return Err(format!("size of {:?} out of date", n.point));
        }
        keys.sort_unstable();
        if n.sec.keys() != keys {
            return Err(format!("secondary of {:?} disagrees with its subtree", n.point));
        }
        Ok(keys)
    }
}

/// Rectangle counting over `(x, y)` points.
pub type Counter2D<X, Y> = RangeTree<X, Y, CountedSet<(Y, X)>>;

impl<X: Coordinate, Y: Coordinate> Default for Counter2D<X, Y> {
    fn default() -> Self {
        RangeTree::new(())
    }
}

impl<X: Coordinate, Y: Coordinate> Counter2D<X, Y> {
    /// Points in `[x_lo, x_hi] × [y_lo, y_hi]`.
    pub fn count(&self, x: (&X, &X), y: (&Y, &Y)) -> u64 {
        if y.0 > y.1 {
            return 0;
        }
        let (lo, hi) = ((*y.0, X::MIN), (*y.1, X::MAX));
        self.pieces(x.0, x.1)
            .into_iter()
            .map(|piece| match piece {
                Piece::Whole(v) => self.secondary(v).count_range(&lo, &hi) as u64,
                Piece::Single(v) => {
                    let ((_, py), _, live) = self.point(v);
                    (live && y.0 <= &py && &py <= y.1) as u64
                }
            })
            .sum()
    }
}

/// Intermediate state of one rectangle query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RectTrace {
    pub m: u64,
    /// x-pieces visited.
    pub pieces: usize,
    /// Colours passing the scratch filter.
    pub survivors: usize,
}

#[derive(Debug, Clone)]
pub struct MajorityIndex2D<X: Coordinate, Y: Coordinate, L> {
    config: AlphaConfig,
    majority: RangeTree<X, Y, MajorityTree<(Y, X)>>,
    all: Counter2D<X, Y>,
    per_colour: Vec<Counter2D<X, Y>>,
    registry: ColourRegistry<L>,
}

impl<X: Coordinate, Y: Coordinate, L: Ord + Clone + Debug> MajorityIndex2D<X, Y, L> {
    pub fn new(config: AlphaConfig) -> Self {
        Self {
            config,
            majority: RangeTree::new(config),
            all: RangeTree::new(()),
            per_colour: vec![RangeTree::new(())],
            registry: ColourRegistry::new(),
        }
    }

    pub fn with_alpha(alpha: Rational) -> Result<Self> {
        Ok(Self::new(AlphaConfig::new(alpha)?))
    }

    /// Bulk construction; `(x, y)` pairs must be distinct.
    pub fn build(config: AlphaConfig, points: Vec<((X, Y), L)>) -> Result<Self> {
        let mut index = Self::new(config);
        let mut ids: Vec<((X, Y), ColourId)> = points
            .into_iter()
            .map(|(p, label)| (p, index.registry.intern(label)))
            .collect();
        ids.sort_by_key(|p| p.0);
        if ids.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateKey);
        }
        let scratch = &mut index.registry.scratch;
        index.majority = RangeTree::build(config, ids.clone(), scratch)?;
        index.all = RangeTree::build((), ids.clone(), scratch)?;
        let mut buckets: Vec<Vec<((X, Y), ColourId)>> = vec![Vec::new(); index.registry.capacity() + 1];
        for &(p, c) in &ids {
            buckets[c.index()].push((p, c));
        }
        let mut per_colour = Vec::with_capacity(buckets.len());
        for bucket in buckets {
            per_colour.push(RangeTree::build((), bucket, &mut index.registry.scratch)?);
        }
        index.per_colour = per_colour;
        Ok(index)
    }

    /// Height of the primary tree.
    pub fn height(&self) -> u32 {
        self.majority.height()
    }

    pub fn config(&self) -> &AlphaConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn registry(&self) -> &ColourRegistry<L> {
        &self.registry
    }

    /// Secondary memberships per live point.
    pub fn memberships(&self) -> Vec<usize> {
        self.majority.memberships()
    }

    pub fn points(&self) -> Vec<((X, Y), L)> {
        self.majority
            .points()
            .into_iter()
            .map(|(p, c)| (p, self.label_of(c).clone()))
            .collect()
    }

    fn label_of(&self, id: ColourId) -> &L {
        self.registry.label(id).expect("stored colour is registered")
    }

    pub fn insert(&mut self, p: (X, Y), label: L) -> Result<()> {
        if self.all.count((&p.0, &p.0), (&p.1, &p.1)) > 0 {
            return Err(Error::DuplicateKey);
        }
        let id = self.registry.intern(label);
        if self.per_colour.len() <= id.index() {
            self.per_colour.resize_with(id.index() + 1, || RangeTree::new(()));
        }
        let scratch = &mut self.registry.scratch;
        self.majority.insert(p, id, scratch)?;
        self.all.insert(p, id, scratch)?;
        self.per_colour[id.index()].insert(p, id, scratch)?;
        Ok(())
    }

    pub fn delete(&mut self, p: &(X, Y)) -> Result<L> {
        let scratch = &mut self.registry.scratch;
        let id = self.majority.remove(p, scratch)?;
        self.all.remove(p, scratch)?;
        self.per_colour[id.index()].remove(p, scratch)?;
        let label = self.label_of(id).clone();
        if let Some(map) = self.registry.release(id)? {
            self.majority.apply_remap(&map);
            map.permute(&mut self.per_colour, self.registry.capacity() + 1);
        }
        Ok(label)
    }

    /// Points in the rectangle.
    pub fn count(&self, x: (&X, &X), y: (&Y, &Y)) -> u64 {
        self.all.count(x, y)
    }

    /// Colours of more than an `alpha` fraction of the points in
    /// `[x_lo, x_hi] × [y_lo, y_hi]`, in label order.
    pub fn query(&mut self, x: (&X, &X), y: (&Y, &Y)) -> Result<Vec<L>> {
        Ok(self.query_counts(x, y)?.labels())
    }

    pub fn query_counts(&mut self, x: (&X, &X), y: (&Y, &Y)) -> Result<QueryAnswer<L>> {
        Ok(self.query_traced(x, y)?.0)
    }

    pub fn query_traced(&mut self, x: (&X, &X), y: (&Y, &Y)) -> Result<(QueryAnswer<L>, RectTrace)> {
        if x.0 > x.1 || y.0 > y.1 {
            return Err(Error::Precondition("rectangle has a reversed side".into()));
        }
        let m = self.all.count(x, y);
        let mut trace = RectTrace { m, ..RectTrace::default() };
        if m == 0 {
            return Ok((QueryAnswer { m, colours: Vec::new() }, trace));
        }
        let (lo, hi) = ((*y.0, X::MIN), (*y.1, X::MAX));
        let pieces = self.majority.pieces(x.0, x.1);
        trace.pieces = pieces.len();
        let scratch = &mut self.registry.scratch;
        for piece in pieces {
            match piece {
                Piece::Whole(v) => {
                    let sec = self.majority.secondary(v);
                    if let Some((a, b)) = sec.snap(&lo, &hi) {
                        sec.gather(&a, &b, scratch);
                    }
                }
                Piece::Single(v) => {
                    let ((_, py), colour, live) = self.majority.point(v);
                    if live && y.0 <= &py && &py <= y.1 {
                        scratch.bump(colour, 1);
                    }
                }
            }
        }
        let alpha = self.config.alpha;
        let survivors: Vec<ColourId> = scratch
            .drain()
            .into_iter()
            .filter(|&(_, total)| params::passes_filter(total, alpha, m))
            .map(|(c, _)| c)
            .collect();
        trace.survivors = survivors.len();
        let mut colours: Vec<Reported<L>> = survivors
            .into_iter()
            .filter_map(|c| {
                let count = self.per_colour[c.index()].count(x, y);
                params::exceeds(count, alpha, m).then(|| Reported {
                    colour: self.label_of(c).clone(),
                    count,
                })
            })
            .collect();
        colours.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.colour.cmp(&b.colour)));
        Ok((QueryAnswer { m, colours }, trace))
    }

    pub fn audit(&self) -> std::result::Result<(), String> {
        self.majority.audit()?;
        self.all.audit()?;
        for t in &self.per_colour {
            t.audit()?;
        }
        self.registry.check_invariants()?;
        if !self.registry.scratch().all_zero() {
            return Err("scratch counters not reset".into());
        }
        let total: usize = self.per_colour.iter().map(RangeTree::len).sum();
        if total != self.all.len() || self.majority.len() != self.all.len() {
            return Err("point counts disagree".into());
        }
        Ok(())
    }
}
