//! Weight-balanced B-tree with per-node candidate colour lists.
//!
//! Branching parameter 8, leaf parameter 1: every leaf holds one coordinate,
//! internal nodes have between 2 and 32 children, and a non-root node of
//! height `h` covers between `8^h / 2` and `2 · 8^h` leaves. Nodes heavier
//! than the prune cutoff keep a list of their most frequent colours with
//! exact counts; the list is refreshed lazily once the number of updates
//! into the subtree reaches `⌈β·ℓ/2⌉`, `ℓ` being the weight at the previous
//! refresh.
//!
//! Nodes live in two arenas (leaves and internal nodes) addressed by `u32`
//! indices. The navigation links used by the integer fast path are kept
//! here as well; see `navigation.rs`.

use std::collections::HashMap;

use crate::colours::{ColourId, Remap, ScratchCounters};
use crate::coord::Coordinate;
use crate::error::{Error, Result};
use crate::params::{AlphaConfig, BRANCHING, MAX_DEGREE, MIN_DEGREE};

pub(crate) const NIL: u32 = u32::MAX;

/// Handle of an internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) u32);

/// Handle of a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Leaf(LeafId),
    Inner(NodeId),
}

/// One entry of a candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub colour: ColourId,
    /// Exact number of points of `colour` under the node.
    pub count: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Leaf<K> {
    pub(crate) key: K,
    pub(crate) colour: ColourId,
    pub(crate) parent: u32,
    pub(crate) anc: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Inner<K> {
    pub(crate) parent: u32,
    pub(crate) height: u32,
    pub(crate) weight: u32,
    pub(crate) lo: K,
    pub(crate) hi: K,
    /// Leaf ids when `height == 1`, internal ids otherwise.
    pub(crate) children: Vec<u32>,
    pub(crate) min_leaf: u32,
    pub(crate) max_leaf: u32,
    pub(crate) anc: u32,
    list: Option<Vec<Candidate>>,
    staleness: u32,
    ell_at_rebuild: u32,
    rebuild_at: u32,
    rebuilds: u32,
}

/// Work counters, reset with [`MajorityTree::reset_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TreeStats {
    pub list_rebuilds: u64,
    /// Leaves visited while rebuilding candidate lists.
    pub rebuild_leaf_visits: u64,
    pub splits: u64,
    pub merges: u64,
    /// Full recomputations of the ancestor links.
    pub global_relinks: u64,
}

/// Read-only snapshot of one internal node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo<K> {
    pub height: u32,
    pub weight: u32,
    pub range: (K, K),
    pub degree: usize,
    pub has_list: bool,
    pub staleness: u32,
    pub ell_at_rebuild: u32,
    /// Updates the current list tolerates before it is rebuilt.
    pub rebuild_threshold: u32,
    /// Times this node's list has been (re)built.
    pub rebuilds: u32,
}

/// A node of the canonical decomposition with its height and weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canonical {
    pub node: NodeRef,
    pub height: u32,
    pub weight: u32,
}

/// Nodes whose ranges partition a query range, each maximal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalSet {
    pub nodes: Vec<Canonical>,
}

impl CanonicalSet {
    /// Distinct heights, highest first.
    pub fn levels(&self) -> Vec<u32> {
        let mut hs: Vec<u32> = self.nodes.iter().map(|c| c.height).collect();
        hs.sort_unstable_by(|a, b| b.cmp(a));
        hs.dedup();
        hs
    }

    /// The nodes lying in the `z` highest distinct heights.
    pub fn top(&self, z: usize) -> CanonicalSet {
        let levels = self.levels();
        match levels.get(z.saturating_sub(1)).copied() {
            _ if z == 0 => CanonicalSet::default(),
            None => self.clone(),
            Some(floor) => CanonicalSet {
                nodes: self.nodes.iter().copied().filter(|c| c.height >= floor).collect(),
            },
        }
    }

    /// Total number of points covered.
    pub fn mass(&self) -> u64 {
        self.nodes.iter().map(|c| c.weight as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node handles sorted, for set comparison.
    pub fn sorted_nodes(&self) -> Vec<NodeRef> {
        let mut v: Vec<NodeRef> = self.nodes.iter().map(|c| c.node).collect();
        v.sort_unstable();
        v
    }
}

/// The `size` most frequent colours of a histogram, by decreasing count and
/// then increasing id.
pub fn most_frequent(mut hist: Vec<(ColourId, u64)>, size: usize) -> Vec<(ColourId, u64)> {
    let order = |a: &(ColourId, u64), b: &(ColourId, u64)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
    if size == 0 {
        return Vec::new();
    }
    if hist.len() > size {
        hist.select_nth_unstable_by(size - 1, order);
        hist.truncate(size);
    }
    hist.sort_unstable_by(order);
    hist
}

fn pow8(h: u32) -> u64 {
    BRANCHING.saturating_pow(h)
}

#[derive(Debug, Clone)]
pub struct MajorityTree<K> {
    pub(crate) config: AlphaConfig,
    pub(crate) leaves: Vec<Leaf<K>>,
    free_leaves: Vec<u32>,
    pub(crate) inner: Vec<Inner<K>>,
    free_inner: Vec<u32>,
    pub(crate) root: Option<NodeRef>,
    leaf_of: HashMap<K, u32>,
    pub(crate) stride: u32,
    pub(crate) stats: TreeStats,
}

impl<K: Coordinate> MajorityTree<K> {
    pub fn new(config: AlphaConfig) -> Self {
        Self {
            config,
            leaves: Vec::new(),
            free_leaves: Vec::new(),
            inner: Vec::new(),
            free_inner: Vec::new(),
            root: None,
            leaf_of: HashMap::new(),
            stride: 1,
            stats: TreeStats::default(),
        }
    }

    /// Bulk construction from points sorted by strictly increasing key.
    pub fn from_sorted(
        config: AlphaConfig,
        points: &[(K, ColourId)],
        scratch: &mut ScratchCounters,
    ) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::DuplicateKey);
        }
        let mut tree = Self::new(config);
        tree.leaf_of.reserve(points.len());
        let mut level: Vec<u32> = points
            .iter()
            .map(|&(key, colour)| tree.alloc_leaf(key, colour, NIL))
            .collect();
        match level.len() {
            0 => return Ok(tree),
            1 => {
                tree.root = Some(NodeRef::Leaf(LeafId(level[0])));
                return Ok(tree);
            }
            _ => {}
        }
        let mut height = 1;
        loop {
            let target = pow8(height);
            let mut groups: Vec<Vec<u32>> = Vec::new();
            let mut current = Vec::new();
            let mut current_weight = 0u64;
            for &child in &level {
                current.push(child);
                current_weight += if height == 1 { 1 } else { tree.inner[child as usize].weight as u64 };
                if current_weight >= target {
                    groups.push(std::mem::take(&mut current));
                    current_weight = 0;
                }
            }
            if !current.is_empty() {
                if 2 * current_weight < target && !groups.is_empty() {
                    groups.last_mut().expect("non-empty").extend(current);
                } else {
                    groups.push(current);
                }
            }
            level = groups
                .into_iter()
                .map(|children| tree.alloc_inner(height, NIL, children))
                .collect();
            if level.len() == 1 {
                tree.root = Some(NodeRef::Inner(NodeId(level[0])));
                break;
            }
            height += 1;
        }
        for v in 0..tree.inner.len() as u32 {
            tree.fresh_list(v, scratch);
        }
        tree.relink_all();
        Ok(tree)
    }

    pub fn config(&self) -> &AlphaConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_of.is_empty()
    }

    pub fn stats(&self) -> TreeStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = TreeStats::default();
    }

    pub fn root(&self) -> Option<NodeRef> {
        self.root
    }

    /// Height of the root (0 for a single leaf or an empty tree).
    pub fn height(&self) -> u32 {
        self.root.map_or(0, |r| self.height_of(r))
    }

    pub fn leaf(&self, key: &K) -> Option<LeafId> {
        self.leaf_of.get(key).map(|&l| LeafId(l))
    }

    pub fn contains(&self, key: &K) -> bool {
        self.leaf_of.contains_key(key)
    }

    pub fn leaf_key(&self, leaf: LeafId) -> K {
        self.leaves[leaf.0 as usize].key
    }

    pub fn leaf_colour(&self, leaf: LeafId) -> ColourId {
        self.leaves[leaf.0 as usize].colour
    }

    pub fn colour_of(&self, key: &K) -> Option<ColourId> {
        self.leaf(key).map(|l| self.leaf_colour(l))
    }

    pub fn parent(&self, node: NodeRef) -> Option<NodeId> {
        let p = self.parent_of(node);
        (p != NIL).then_some(NodeId(p))
    }

    pub fn children(&self, node: NodeId) -> Vec<NodeRef> {
        (0..self.inner[node.0 as usize].children.len())
            .map(|i| self.child(node.0, i))
            .collect()
    }

    pub fn node_height(&self, node: NodeRef) -> u32 {
        self.height_of(node)
    }

    pub fn node_weight(&self, node: NodeRef) -> u32 {
        self.weight_of(node)
    }

    /// Coordinates of the leftmost and rightmost leaf under `node`.
    pub fn range(&self, node: NodeRef) -> (K, K) {
        (self.lo_of(node), self.hi_of(node))
    }

    pub fn candidates(&self, node: NodeId) -> Option<&[Candidate]> {
        self.inner[node.0 as usize].list.as_deref()
    }

    pub fn node_info(&self, node: NodeId) -> NodeInfo<K> {
        let n = &self.inner[node.0 as usize];
        NodeInfo {
            height: n.height,
            weight: n.weight,
            range: (n.lo, n.hi),
            degree: n.children.len(),
            has_list: n.list.is_some(),
            staleness: n.staleness,
            ell_at_rebuild: n.ell_at_rebuild,
            rebuild_threshold: n.rebuild_at,
            rebuilds: n.rebuilds,
        }
    }

    /// Leaves from left to right.
    pub fn leaves_in_order(&self) -> Vec<LeafId> {
        let mut out = Vec::with_capacity(self.len());
        if let Some(r) = self.root {
            self.collect_leaves(r, &mut |l| out.push(LeafId(l)));
        }
        out
    }

    /// Leaves under `node` from left to right.
    pub fn leaves_below(&self, node: NodeRef) -> Vec<LeafId> {
        let mut out = Vec::with_capacity(self.weight_of(node) as usize);
        self.collect_leaves(node, &mut |l| out.push(LeafId(l)));
        out
    }

    /// `(key, colour)` pairs in key order.
    pub fn points(&self) -> Vec<(K, ColourId)> {
        let mut out = Vec::with_capacity(self.len());
        if let Some(r) = self.root {
            self.collect_leaves(r, &mut |l| {
                let leaf = &self.leaves[l as usize];
                out.push((leaf.key, leaf.colour));
            });
        }
        out
    }

    /// Every internal node currently in the tree.
    pub fn inner_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<u32> = match self.root {
            Some(NodeRef::Inner(NodeId(r))) => vec![r],
            _ => Vec::new(),
        };
        while let Some(v) = stack.pop() {
            out.push(NodeId(v));
            let n = &self.inner[v as usize];
            if n.height > 1 {
                stack.extend(&n.children);
            }
        }
        out
    }

    // ---- node accessors over NodeRef ----

    pub(crate) fn child(&self, v: u32, i: usize) -> NodeRef {
        let n = &self.inner[v as usize];
        if n.height == 1 {
            NodeRef::Leaf(LeafId(n.children[i]))
        } else {
            NodeRef::Inner(NodeId(n.children[i]))
        }
    }

    pub(crate) fn lo_of(&self, r: NodeRef) -> K {
        match r {
            NodeRef::Leaf(l) => self.leaves[l.0 as usize].key,
            NodeRef::Inner(v) => self.inner[v.0 as usize].lo,
        }
    }

    pub(crate) fn hi_of(&self, r: NodeRef) -> K {
        match r {
            NodeRef::Leaf(l) => self.leaves[l.0 as usize].key,
            NodeRef::Inner(v) => self.inner[v.0 as usize].hi,
        }
    }

    pub(crate) fn weight_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Leaf(_) => 1,
            NodeRef::Inner(v) => self.inner[v.0 as usize].weight,
        }
    }

    pub(crate) fn height_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Leaf(_) => 0,
            NodeRef::Inner(v) => self.inner[v.0 as usize].height,
        }
    }

    pub(crate) fn parent_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Leaf(l) => self.leaves[l.0 as usize].parent,
            NodeRef::Inner(v) => self.inner[v.0 as usize].parent,
        }
    }

    pub(crate) fn min_leaf_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Leaf(l) => l.0,
            NodeRef::Inner(v) => self.inner[v.0 as usize].min_leaf,
        }
    }

    pub(crate) fn max_leaf_of(&self, r: NodeRef) -> u32 {
        match r {
            NodeRef::Leaf(l) => l.0,
            NodeRef::Inner(v) => self.inner[v.0 as usize].max_leaf,
        }
    }

    fn set_parent(&mut self, height_of_parent: u32, child: u32, parent: u32) {
        if height_of_parent == 1 {
            self.leaves[child as usize].parent = parent;
        } else {
            self.inner[child as usize].parent = parent;
        }
    }

    /// Index of the child of `v` whose subtree should hold `key`.
    pub(crate) fn child_index(&self, v: u32, key: &K) -> usize {
        let n = &self.inner[v as usize];
        let idx = if n.height == 1 {
            n.children
                .partition_point(|&l| self.leaves[l as usize].key < *key)
        } else {
            n.children
                .partition_point(|&c| self.inner[c as usize].hi < *key)
        };
        idx.min(n.children.len() - 1)
    }

    fn collect_leaves(&self, r: NodeRef, f: &mut impl FnMut(u32)) {
        match r {
            NodeRef::Leaf(l) => f(l.0),
            NodeRef::Inner(v) => {
                let n = &self.inner[v.0 as usize];
                if n.height == 1 {
                    n.children.iter().for_each(|&l| f(l));
                } else {
                    for &c in &n.children {
                        self.collect_leaves(NodeRef::Inner(NodeId(c)), f);
                    }
                }
            }
        }
    }

    // ---- allocation ----

    fn alloc_leaf(&mut self, key: K, colour: ColourId, parent: u32) -> u32 {
        let leaf = Leaf {
            key,
            colour,
            parent,
            anc: NIL,
        };
        let id = match self.free_leaves.pop() {
            Some(id) => {
                self.leaves[id as usize] = leaf;
                id
            }
            None => {
                self.leaves.push(leaf);
                (self.leaves.len() - 1) as u32
            }
        };
        self.leaf_of.insert(key, id);
        id
    }

    fn alloc_inner(&mut self, height: u32, parent: u32, children: Vec<u32>) -> u32 {
        let first = if height == 1 {
            self.leaves[children[0] as usize].key
        } else {
            self.inner[children[0] as usize].lo
        };
        let node = Inner {
            parent,
            height,
            weight: 0,
            lo: first,
            hi: first,
            children,
            min_leaf: NIL,
            max_leaf: NIL,
            anc: NIL,
            list: None,
            staleness: 0,
            ell_at_rebuild: 0,
            rebuild_at: 0,
            rebuilds: 0,
        };
        let id = match self.free_inner.pop() {
            Some(id) => {
                self.inner[id as usize] = node;
                id
            }
            None => {
                self.inner.push(node);
                (self.inner.len() - 1) as u32
            }
        };
        for i in 0..self.inner[id as usize].children.len() {
            let c = self.inner[id as usize].children[i];
            self.set_parent(height, c, id);
        }
        self.refresh(id);
        id
    }

    fn free_inner_node(&mut self, v: u32) {
        let n = &mut self.inner[v as usize];
        n.children = Vec::new();
        n.list = None;
        n.parent = NIL;
        self.free_inner.push(v);
    }

    /// Recomputes weight, range and extreme leaves from the children.
    fn refresh(&mut self, v: u32) {
        let deg = self.inner[v as usize].children.len();
        let first = self.child(v, 0);
        let last = self.child(v, deg - 1);
        let weight: u32 = if self.inner[v as usize].height == 1 {
            deg as u32
        } else {
            self.inner[v as usize]
                .children
                .iter()
                .map(|&c| self.inner[c as usize].weight)
                .sum()
        };
        let (lo, hi) = (self.lo_of(first), self.hi_of(last));
        let (min_leaf, max_leaf) = (self.min_leaf_of(first), self.max_leaf_of(last));
        let n = &mut self.inner[v as usize];
        n.weight = weight;
        n.lo = lo;
        n.hi = hi;
        n.min_leaf = min_leaf;
        n.max_leaf = max_leaf;
    }

    fn overweight(&self, v: u32) -> bool {
        let n = &self.inner[v as usize];
        n.weight as u64 > 2 * pow8(n.height)
    }

    fn underweight(&self, v: u32) -> bool {
        let n = &self.inner[v as usize];
        2 * (n.weight as u64) < pow8(n.height)
    }

    // ---- candidate lists ----

    /// Recomputes the list of `v` from a scan of its leaves.
    pub(crate) fn rebuild_list(&mut self, v: u32, scratch: &mut ScratchCounters) {
        let mut stack = vec![v];
        let mut visits = 0u64;
        while let Some(u) = stack.pop() {
            let n = &self.inner[u as usize];
            if n.height == 1 {
                for &l in &n.children {
                    scratch.bump(self.leaves[l as usize].colour, 1);
                }
                visits += n.children.len() as u64;
            } else {
                stack.extend_from_slice(&n.children);
            }
        }
        let hist = most_frequent(scratch.drain(), self.config.list_size as usize);
        let weight = self.inner[v as usize].weight;
        let threshold = self.config.rebuild_threshold(weight as u64) as u32;
        let n = &mut self.inner[v as usize];
        n.list = Some(
            hist.into_iter()
                .map(|(colour, count)| Candidate {
                    colour,
                    count: count as u32,
                })
                .collect(),
        );
        n.staleness = 0;
        n.ell_at_rebuild = weight;
        n.rebuild_at = threshold;
        n.rebuilds += 1;
        self.stats.list_rebuilds += 1;
        self.stats.rebuild_leaf_visits += visits;
    }

    /// Rebuilds or drops the list of a restructured node.
    fn fresh_list(&mut self, v: u32, scratch: &mut ScratchCounters) {
        if self.inner[v as usize].weight as u64 > self.config.prune_cutoff {
            self.rebuild_list(v, scratch);
        } else {
            let n = &mut self.inner[v as usize];
            n.list = None;
            n.staleness = 0;
        }
    }

    /// Lazy list maintenance for one update of `colour` below `v`; the
    /// weight of `v` must already reflect the update.
    fn account(&mut self, v: u32, colour: ColourId, inserted: bool, scratch: &mut ScratchCounters) {
        let cutoff = self.config.prune_cutoff;
        let n = &mut self.inner[v as usize];
        if n.weight as u64 <= cutoff {
            n.list = None;
            n.staleness = 0;
            return;
        }
        let Some(list) = n.list.as_mut() else {
            self.rebuild_list(v, scratch);
            return;
        };
        if let Some(pos) = list.iter().position(|c| c.colour == colour) {
            if inserted {
                list[pos].count += 1;
            } else {
                list[pos].count -= 1;
                if list[pos].count == 0 {
                    list.remove(pos);
                }
            }
        }
        n.staleness += 1;
        if n.staleness >= n.rebuild_at {
            self.rebuild_list(v, scratch);
        }
    }

    /// Relabels colours after a registry renumbering.
    pub fn apply_remap(&mut self, map: &Remap) {
        for leaf in self.leaf_of.values() {
            let l = &mut self.leaves[*leaf as usize];
            l.colour = map.apply(l.colour);
        }
        for v in self.inner_nodes() {
            if let Some(list) = self.inner[v.0 as usize].list.as_mut() {
                for c in list.iter_mut() {
                    c.colour = map.apply(c.colour);
                }
            }
        }
    }

    // ---- updates ----

    pub fn insert(&mut self, key: K, colour: ColourId, scratch: &mut ScratchCounters) -> Result<LeafId> {
        if self.leaf_of.contains_key(&key) {
            return Err(Error::DuplicateKey);
        }
        let root = match self.root {
            None => {
                let l = self.alloc_leaf(key, colour, NIL);
                self.root = Some(NodeRef::Leaf(LeafId(l)));
                return Ok(LeafId(l));
            }
            Some(NodeRef::Leaf(LeafId(other))) => {
                let l = self.alloc_leaf(key, colour, NIL);
                let pair = if self.leaves[other as usize].key < key {
                    vec![other, l]
                } else {
                    vec![l, other]
                };
                let r = self.alloc_inner(1, NIL, pair);
                self.fresh_list(r, scratch);
                self.root = Some(NodeRef::Inner(NodeId(r)));
                self.relink_all();
                return Ok(LeafId(l));
            }
            Some(NodeRef::Inner(NodeId(r))) => r,
        };
        let mut v = root;
        while self.inner[v as usize].height > 1 {
            let i = self.child_index(v, &key);
            v = self.inner[v as usize].children[i];
        }
        let l = self.alloc_leaf(key, colour, v);
        let pos = self.inner[v as usize]
            .children
            .partition_point(|&c| self.leaves[c as usize].key < key);
        self.inner[v as usize].children.insert(pos, l);

        let mut u = v;
        loop {
            self.refresh(u);
            self.account(u, colour, true, scratch);
            let parent = self.inner[u as usize].parent;
            if self.overweight(u) {
                self.split(u, scratch);
            }
            if parent == NIL {
                break;
            }
            u = parent;
        }
        self.link_leaf(l);
        Ok(LeafId(l))
    }

    pub fn delete(&mut self, key: &K, scratch: &mut ScratchCounters) -> Result<ColourId> {
        let l = self.leaf_of.remove(key).ok_or(Error::NotFound)?;
        let colour = self.leaves[l as usize].colour;
        self.free_leaves.push(l);
        if self.root == Some(NodeRef::Leaf(LeafId(l))) {
            self.root = None;
            return Ok(colour);
        }
        let p = self.leaves[l as usize].parent;
        self.leaves[l as usize].parent = NIL;
        let siblings = &mut self.inner[p as usize].children;
        let pos = siblings.iter().position(|&c| c == l).expect("leaf listed in parent");
        siblings.remove(pos);

        let mut u = p;
        loop {
            let parent = self.inner[u as usize].parent;
            if !self.inner[u as usize].children.is_empty() {
                self.refresh(u);
                self.account(u, colour, false, scratch);
                if parent != NIL && self.underweight(u) {
                    self.merge(u, scratch);
                }
            }
            if parent == NIL {
                break;
            }
            u = parent;
        }
        self.collapse_root();
        Ok(colour)
    }

    fn split(&mut self, v: u32, scratch: &mut ScratchCounters) {
        self.stats.splits += 1;
        let height = self.inner[v as usize].height;
        let deg = self.inner[v as usize].children.len();
        let weights: Vec<u64> = (0..deg).map(|i| self.weight_of(self.child(v, i)) as u64).collect();
        let total: u64 = weights.iter().sum();
        let (mut best, mut best_gap, mut prefix) = (1, u64::MAX, 0u64);
        for (s, w) in weights.iter().enumerate().take(deg - 1) {
            prefix += w;
            let gap = (2 * prefix).abs_diff(total);
            if gap < best_gap {
                best = s + 1;
                best_gap = gap;
            }
        }
        let parent = self.inner[v as usize].parent;
        let moved = self.inner[v as usize].children.split_off(best);
        let u = self.alloc_inner(height, parent, moved);
        self.refresh(v);
        self.fresh_list(v, scratch);
        self.fresh_list(u, scratch);
        if parent == NIL {
            let r = self.alloc_inner(height + 1, NIL, vec![v, u]);
            self.fresh_list(r, scratch);
            self.root = Some(NodeRef::Inner(NodeId(r)));
            self.relink_all();
        } else {
            let siblings = &mut self.inner[parent as usize].children;
            let pos = siblings.iter().position(|&c| c == v).expect("child listed in parent");
            siblings.insert(pos + 1, u);
            self.relink_subtree(v);
            self.relink_subtree(u);
        }
    }

    fn merge(&mut self, v: u32, scratch: &mut ScratchCounters) {
        self.stats.merges += 1;
        let parent = self.inner[v as usize].parent;
        let height = self.inner[v as usize].height;
        let siblings = &self.inner[parent as usize].children;
        let idx = siblings.iter().position(|&c| c == v).expect("child listed in parent");
        let (left, right, right_idx) = if idx + 1 < siblings.len() {
            (v, siblings[idx + 1], idx + 1)
        } else {
            (siblings[idx - 1], v, idx)
        };
        let moved = std::mem::take(&mut self.inner[right as usize].children);
        for &c in &moved {
            self.set_parent(height, c, left);
        }
        self.inner[left as usize].children.extend(moved);
        self.inner[parent as usize].children.remove(right_idx);
        self.free_inner_node(right);
        self.refresh(left);
        if self.overweight(left) {
            self.split(left, scratch);
        } else {
            self.fresh_list(left, scratch);
            self.relink_subtree(left);
        }
    }

    fn collapse_root(&mut self) {
        let mut changed = false;
        while let Some(NodeRef::Inner(NodeId(r))) = self.root {
            if self.inner[r as usize].children.len() != 1 {
                break;
            }
            let only = self.child(r, 0);
            match only {
                NodeRef::Leaf(l) => self.leaves[l.0 as usize].parent = NIL,
                NodeRef::Inner(c) => self.inner[c.0 as usize].parent = NIL,
            }
            self.free_inner_node(r);
            self.root = Some(only);
            changed = true;
        }
        if changed {
            self.relink_all();
        }
    }

    // ---- queries ----

    /// Smallest key `≥ lo` and largest key `≤ hi`, found by descending the
    /// tree; `None` when no key lies in `[lo, hi]`.
    pub fn snap(&self, lo: &K, hi: &K) -> Option<(K, K)> {
        if lo > hi {
            return None;
        }
        let root = self.root?;
        let a = self.descend_successor(root, lo)?;
        let b = self.descend_predecessor(root, hi)?;
        (a <= b).then_some((a, b))
    }

    fn descend_successor(&self, mut r: NodeRef, x: &K) -> Option<K> {
        if self.hi_of(r) < *x {
            return None;
        }
        while let NodeRef::Inner(v) = r {
            r = self.child(v.0, self.child_index(v.0, x));
        }
        Some(self.lo_of(r))
    }

    fn descend_predecessor(&self, mut r: NodeRef, x: &K) -> Option<K> {
        if self.lo_of(r) > *x {
            return None;
        }
        while let NodeRef::Inner(v) = r {
            let n = &self.inner[v.0 as usize];
            let idx = if n.height == 1 {
                n.children.partition_point(|&l| self.leaves[l as usize].key <= *x)
            } else {
                n.children.partition_point(|&c| self.inner[c as usize].lo <= *x)
            };
            r = self.child(v.0, idx - 1);
        }
        Some(self.lo_of(r))
    }

    /// Canonical decomposition of `[lo, hi]` by top-down descent.
    pub fn canonical(&self, lo: &K, hi: &K) -> CanonicalSet {
        let mut out = Vec::new();
        if let Some(r) = self.root {
            if lo <= hi {
                self.canonical_rec(r, lo, hi, &mut out);
            }
        }
        CanonicalSet {
            nodes: out
                .into_iter()
                .map(|node| Canonical {
                    node,
                    height: self.height_of(node),
                    weight: self.weight_of(node),
                })
                .collect(),
        }
    }

    fn canonical_rec(&self, r: NodeRef, lo: &K, hi: &K, out: &mut Vec<NodeRef>) {
        let (a, b) = (self.lo_of(r), self.hi_of(r));
        if b < *lo || a > *hi {
            return;
        }
        if *lo <= a && b <= *hi {
            out.push(r);
            return;
        }
        let NodeRef::Inner(v) = r else {
            unreachable!("a leaf lies entirely inside or outside the range")
        };
        let deg = self.inner[v.0 as usize].children.len();
        for i in self.child_index(v.0, lo)..deg {
            let c = self.child(v.0, i);
            if self.lo_of(c) > *hi {
                break;
            }
            self.canonical_rec(c, lo, hi, out);
        }
    }

    /// Canonical decomposition of a general range; ranges covered by a
    /// single node are rejected.
    pub fn decompose(&self, lo: &K, hi: &K) -> Result<CanonicalSet> {
        let set = self.canonical(lo, hi);
        if set.len() <= 1 {
            return Err(Error::NotGeneral);
        }
        Ok(set)
    }

    /// Adds the stored counts of `node` (or, for nodes without a list, the
    /// colours of its leaves) into `scratch`.
    pub(crate) fn bump_node(&self, node: NodeRef, scratch: &mut ScratchCounters) {
        match node {
            NodeRef::Leaf(l) => scratch.bump(self.leaves[l.0 as usize].colour, 1),
            NodeRef::Inner(v) => match &self.inner[v.0 as usize].list {
                Some(list) => {
                    for c in list {
                        scratch.bump(c.colour, c.count as u64);
                    }
                }
                None => self.collect_leaves(node, &mut |l| {
                    scratch.bump(self.leaves[l as usize].colour, 1)
                }),
            },
        }
    }

    /// The nodes of the canonical decomposition of `[a, b]` in its top
    /// `top` heights. `a` and `b` must be stored keys.
    pub fn top_nodes(&self, a: &K, b: &K, top: usize) -> CanonicalSet {
        let (Some(la), Some(lb)) = (self.leaf(a), self.leaf(b)) else {
            return CanonicalSet::default();
        };
        if K::INTEGER {
            self.findtop(la, lb, top).nodes
        } else {
            self.canonical(a, b).top(top)
        }
    }

    /// Accumulates candidate counts for the snapped range `[a, b]` into
    /// `scratch`.
    pub(crate) fn gather(&self, a: &K, b: &K, scratch: &mut ScratchCounters) {
        let top = self.config.top_levels as usize;
        for c in self.top_nodes(a, b, top).nodes {
            self.bump_node(c.node, scratch);
        }
    }

    // ---- audits ----

    /// Degree and weight bounds of every node plus structural consistency.
    pub fn audit_balance(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return if self.leaf_of.is_empty() {
                Ok(())
            } else {
                Err("empty tree with registered leaves".into())
            };
        };
        if self.parent_of(root) != NIL {
            return Err("root has a parent".into());
        }
        let mut leaves = 0usize;
        let mut stack = vec![root];
        while let Some(r) = stack.pop() {
            let NodeRef::Inner(NodeId(v)) = r else {
                leaves += 1;
                continue;
            };
            let n = &self.inner[v as usize];
            let deg = n.children.len();
            if !(MIN_DEGREE..=MAX_DEGREE).contains(&deg) {
                return Err(format!("node {v} at height {} has degree {deg}", n.height));
            }
            let cap = 2 * pow8(n.height);
            if n.weight as u64 > cap {
                return Err(format!("node {v} at height {} weighs {} > {cap}", n.height, n.weight));
            }
            if Some(r) != self.root && 2 * (n.weight as u64) < pow8(n.height) {
                return Err(format!(
                    "node {v} at height {} weighs {} < {}",
                    n.height,
                    n.weight,
                    pow8(n.height) / 2
                ));
            }
            let mut weight = 0u32;
            let mut prev_hi: Option<K> = None;
            for i in 0..deg {
                let c = self.child(v, i);
                if self.parent_of(c) != v {
                    return Err(format!("child {c:?} of {v} has wrong parent"));
                }
                if self.height_of(c) + 1 != n.height {
                    return Err(format!("child {c:?} of {v} at wrong height"));
                }
                if prev_hi.is_some_and(|p| p >= self.lo_of(c)) {
                    return Err(format!("children of {v} out of order"));
                }
                prev_hi = Some(self.hi_of(c));
                weight += self.weight_of(c);
                stack.push(c);
            }
            let first = self.child(v, 0);
            let last = self.child(v, deg - 1);
            if weight != n.weight
                || n.lo != self.lo_of(first)
                || n.hi != self.hi_of(last)
                || n.min_leaf != self.min_leaf_of(first)
                || n.max_leaf != self.max_leaf_of(last)
            {
                return Err(format!("node {v} summary out of date"));
            }
        }
        if leaves != self.leaf_of.len() {
            return Err(format!("{leaves} leaves reachable, {} registered", self.leaf_of.len()));
        }
        for (k, &l) in &self.leaf_of {
            if self.leaves[l as usize].key != *k {
                return Err("leaf index out of date".into());
            }
        }
        Ok(())
    }

    /// Candidate lists: present exactly on heavy nodes, exact counts, and
    /// every β-majority of the node's range listed.
    pub fn audit_lists(&self) -> std::result::Result<(), String> {
        let beta = self.config.beta;
        for NodeId(v) in self.inner_nodes() {
            let n = &self.inner[v as usize];
            let heavy = n.weight as u64 > self.config.prune_cutoff;
            let Some(list) = &n.list else {
                if heavy {
                    return Err(format!("heavy node {v} has no list"));
                }
                continue;
            };
            if !heavy {
                return Err(format!("light node {v} keeps a list"));
            }
            if list.len() as u64 > self.config.list_size {
                return Err(format!("list of node {v} too long"));
            }
            if n.staleness >= n.rebuild_at {
                return Err(format!("node {v} is past its rebuild threshold"));
            }
            let mut hist: HashMap<ColourId, u32> = HashMap::new();
            self.collect_leaves(NodeRef::Inner(NodeId(v)), &mut |l| {
                *hist.entry(self.leaves[l as usize].colour).or_default() += 1;
            });
            for c in list {
                if hist.get(&c.colour).copied() != Some(c.count) || c.count == 0 {
                    return Err(format!("node {v} miscounts colour {:?}", c.colour));
                }
            }
            for (colour, count) in hist {
                let majority = count as u128 * *beta.denom() as u128
                    > *beta.numer() as u128 * n.weight as u128;
                if majority && !list.iter().any(|c| c.colour == colour) {
                    return Err(format!("node {v} is missing beta-majority {colour:?}"));
                }
            }
        }
        Ok(())
    }

    /// Every audit in one call.
    pub fn audit(&self) -> std::result::Result<(), String> {
        self.audit_balance()?;
        self.audit_lists()?;
        self.audit_links()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn config(p: u64, q: u64) -> AlphaConfig {
        AlphaConfig::new(Rational::new(p, q)).unwrap()
    }

    fn scratch() -> ScratchCounters {
        ScratchCounters::with_capacity(256)
    }

    fn depth(tree: &MajorityTree<i64>, node: NodeRef) -> usize {
        let mut d = 0;
        let mut p = tree.parent(node);
        while let Some(v) = p {
            d += 1;
            p = tree.parent(NodeRef::Inner(v));
        }
        d
    }

    fn walk_lca(tree: &MajorityTree<i64>, a: LeafId, b: LeafId) -> NodeId {
        let mut x = NodeRef::Leaf(a);
        let mut y = NodeRef::Leaf(b);
        let (mut dx, mut dy) = (depth(tree, x), depth(tree, y));
        while dx > dy {
            x = NodeRef::Inner(tree.parent(x).unwrap());
            dx -= 1;
        }
        while dy > dx {
            y = NodeRef::Inner(tree.parent(y).unwrap());
            dy -= 1;
        }
        while x != y {
            x = NodeRef::Inner(tree.parent(x).unwrap());
            y = NodeRef::Inner(tree.parent(y).unwrap());
        }
        match x {
            NodeRef::Inner(v) => v,
            NodeRef::Leaf(_) => unreachable!(),
        }
    }

    #[test]
    fn most_frequent_picks_top_counts() {
        let hist = vec![(ColourId(3), 1), (ColourId(1), 5), (ColourId(2), 3)];
        assert_eq!(most_frequent(hist, 2), vec![(ColourId(1), 5), (ColourId(2), 3)]);
        let tie = vec![(ColourId(9), 2), (ColourId(4), 2), (ColourId(5), 2)];
        assert_eq!(most_frequent(tie, 1), vec![(ColourId(4), 2)]);
        assert_eq!(most_frequent(vec![(ColourId(1), 7)], 3), vec![(ColourId(1), 7)]);
    }

    #[test]
    fn empty_and_tiny_trees() {
        let mut s = scratch();
        let mut t: MajorityTree<i64> = MajorityTree::new(config(1, 2));
        assert!(t.snap(&0, &10).is_none());
        t.insert(5, ColourId(1), &mut s).unwrap();
        assert_eq!(t.insert(5, ColourId(2), &mut s), Err(Error::DuplicateKey));
        assert_eq!(t.snap(&0, &10), Some((5, 5)));
        t.insert(1, ColourId(2), &mut s).unwrap();
        t.insert(9, ColourId(2), &mut s).unwrap();
        assert_eq!(t.snap(&2, &8), Some((5, 5)));
        assert_eq!(t.snap(&1, &9), Some((1, 9)));
        assert_eq!(t.snap(&6, &8), None);
        t.audit().unwrap();
        assert_eq!(t.delete(&5, &mut s), Ok(ColourId(1)));
        assert_eq!(t.delete(&5, &mut s), Err(Error::NotFound));
        t.delete(&1, &mut s).unwrap();
        t.delete(&9, &mut s).unwrap();
        assert!(t.is_empty() && t.root().is_none());
        t.audit().unwrap();
    }

    #[test]
    fn bulk_build_matches_invariants() {
        let mut s = scratch();
        for n in [0usize, 1, 2, 7, 8, 9, 12, 17, 100, 513, 5000] {
            let pts: Vec<(i64, ColourId)> =
                (0..n as i64).map(|i| (i * 3, ColourId((i % 7) as u32 + 1))).collect();
            let t = MajorityTree::from_sorted(config(1, 2), &pts, &mut s).unwrap();
            assert_eq!(t.len(), n);
            if n > 0 {
                assert_eq!(t.node_weight(t.root().unwrap()) as usize, n);
            }
            t.audit().unwrap_or_else(|e| panic!("n = {n}: {e}"));
            assert_eq!(t.points(), pts);
        }
        let dup = vec![(1i64, ColourId(1)), (1, ColourId(2))];
        assert!(MajorityTree::from_sorted(config(1, 2), &dup, &mut s).is_err());
    }

    #[test]
    fn random_updates_keep_every_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = scratch();
        for &(p, q) in &[(1u64, 2u64), (1, 10)] {
            let mut t: MajorityTree<i64> = MajorityTree::new(config(p, q));
            let mut model: BTreeMap<i64, ColourId> = BTreeMap::new();
            for step in 0..6000 {
                let grow = model.len() < 50 || rng.random_bool(0.6);
                if grow {
                    let k = rng.random_range(0..4000);
                    let c = ColourId(rng.random_range(1..=6));
                    let r = t.insert(k, c, &mut s);
                    assert_eq!(r.is_ok(), !model.contains_key(&k));
                    model.entry(k).or_insert(c);
                } else {
                    let k = *model.keys().nth(rng.random_range(0..model.len())).unwrap();
                    assert_eq!(t.delete(&k, &mut s), Ok(model.remove(&k).unwrap()));
                }
                if step % 97 == 0 {
                    t.audit().unwrap_or_else(|e| panic!("step {step}: {e}"));
                    assert!(s.all_zero());
                }
            }
            t.audit().unwrap();
            let expect: Vec<(i64, ColourId)> = model.into_iter().collect();
            assert_eq!(t.points(), expect);
        }
    }

    #[test]
    fn drain_to_empty_then_refill() {
        let mut s = scratch();
        let mut t: MajorityTree<i64> = MajorityTree::new(config(1, 4));
        for k in 0..700 {
            t.insert(k, ColourId((k % 3) as u32 + 1), &mut s).unwrap();
        }
        for k in (0..700).rev() {
            t.delete(&k, &mut s).unwrap();
            if k % 50 == 0 {
                t.audit().unwrap();
            }
        }
        assert!(t.is_empty());
        for k in 0..100 {
            t.insert(k * 2, ColourId(1), &mut s).unwrap();
        }
        t.audit().unwrap();
    }

    #[test]
    fn canonical_partitions_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = scratch();
        let pts: Vec<(i64, ColourId)> = (0..3000).map(|i| (i * 2, ColourId(1))).collect();
        let t = MajorityTree::from_sorted(config(1, 4), &pts, &mut s).unwrap();
        for _ in 0..300 {
            let a = rng.random_range(0..6000);
            let b = rng.random_range(a..6000);
            let set = t.canonical(&a, &b);
            let mut covered = Vec::new();
            for c in &set.nodes {
                let (lo, hi) = t.range(c.node);
                assert!(a <= lo && hi <= b);
                if let Some(p) = t.parent(c.node) {
                    let (plo, phi) = t.range(NodeRef::Inner(p));
                    assert!(plo < a || phi > b, "parent fully inside");
                }
                covered.extend(pts.iter().map(|p| p.0).filter(|&k| lo <= k && k <= hi));
            }
            covered.sort_unstable();
            let want: Vec<i64> = pts.iter().map(|p| p.0).filter(|&k| a <= k && k <= b).collect();
            assert_eq!(covered, want);
        }
    }

    #[test]
    fn lca_and_findtop_agree_with_references() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = scratch();
        let mut t: MajorityTree<i64> = MajorityTree::new(config(1, 10));
        for _ in 0..20000 {
            let _ = t.insert(rng.random_range(0..1_000_000), ColourId(1), &mut s);
        }
        for _ in 0..3000 {
            let k = *t.points().get(rng.random_range(0..t.len())).map(|p| &p.0).unwrap();
            t.delete(&k, &mut s).unwrap();
        }
        t.audit_links().unwrap();
        let leaves = t.leaves_in_order();
        let top = t.config().top_levels as usize;
        for _ in 0..1000 {
            let i = rng.random_range(0..leaves.len() - 1);
            let j = rng.random_range(i + 1..leaves.len());
            let (a, b) = (leaves[i], leaves[j]);
            assert_eq!(t.lca(a, b).unwrap(), walk_lca(&t, a, b));
            let (ka, kb) = (t.leaf_key(a), t.leaf_key(b));
            let full = t.canonical(&ka, &kb);
            for z in [1, 2, top, 64] {
                let found = t.findtop(a, b, z);
                assert_eq!(found.nodes.sorted_nodes(), full.top(z).sorted_nodes());
                assert!(found.lca_calls <= 4 * z);
            }
        }
        assert!(t.lca(leaves[0], leaves[0]).is_err());
        assert_eq!(t.lca(leaves[0], *leaves.last().unwrap()).unwrap(), match t.root().unwrap() {
            NodeRef::Inner(r) => r,
            NodeRef::Leaf(_) => unreachable!(),
        });
    }

    #[test]
    fn list_rebuilds_after_threshold_updates() {
        let mut s = scratch();
        let cfg = config(1, 2);
        let pts: Vec<(i64, ColourId)> = (0..420).map(|i| (i * 10, ColourId((i % 5) as u32 + 1))).collect();
        let mut t = MajorityTree::from_sorted(cfg, &pts, &mut s).unwrap();
        let NodeRef::Inner(root) = t.root().unwrap() else { unreachable!() };
        let info = t.node_info(root);
        assert_eq!((info.weight, info.rebuild_threshold, info.rebuilds), (420, 10, 1));
        for i in 0..9 {
            t.insert(i * 10 + 5, ColourId(9), &mut s).unwrap();
            assert_eq!(t.node_info(root).rebuilds, 1);
        }
        t.insert(95, ColourId(9), &mut s).unwrap();
        assert_eq!(t.node_info(root).rebuilds, 2);
        assert_eq!(t.node_info(root).staleness, 0);
    }
}
