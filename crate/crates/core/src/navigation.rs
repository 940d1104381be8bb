//! Ancestor links, lowest common ancestors and top-level canonical search.
//!
//! Every node stores a link to its ancestor `stride` levels up (the root
//! when it is shallower than that), where `stride = ⌈√lg n⌉` is fixed at the
//! last global relink. An LCA query jumps along these links while the
//! target leaf stays outside the jumped-to range and then finishes with
//! parent steps, so it costs `O(√lg n)`.

use crate::coord::Coordinate;
use crate::error::{Error, Result};
use crate::tree::{Canonical, CanonicalSet, LeafId, MajorityTree, NodeId, NodeRef, NIL};

/// Link stride for a tree holding `n` leaves.
pub fn stride_for(n: usize) -> u32 {
    let lg = (n.max(2) as f64).log2().max(1.0);
    lg.sqrt().ceil() as u32
}

/// Result of a top-level canonical search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FindTop {
    pub nodes: CanonicalSet,
    /// LCA computations performed.
    pub lca_calls: usize,
}

impl<K: Coordinate> MajorityTree<K> {
    pub fn stride(&self) -> u32 {
        self.stride
    }

    /// The stored ancestor link of `node`.
    pub fn anc(&self, node: NodeRef) -> Option<NodeId> {
        let a = self.anc_raw(node);
        (a != NIL).then_some(NodeId(a))
    }

    fn anc_raw(&self, node: NodeRef) -> u32 {
        match node {
            NodeRef::Leaf(l) => self.leaves[l.0 as usize].anc,
            NodeRef::Inner(v) => self.inner[v.0 as usize].anc,
        }
    }

    fn set_anc(&mut self, node: NodeRef, anc: u32) {
        match node {
            NodeRef::Leaf(l) => self.leaves[l.0 as usize].anc = anc,
            NodeRef::Inner(v) => self.inner[v.0 as usize].anc = anc,
        }
    }

    /// The ancestor `stride` levels above `node` by parent walk, or the root.
    fn expected_anc(&self, node: NodeRef) -> u32 {
        let mut x = self.parent_of(node);
        if x == NIL {
            return NIL;
        }
        for _ in 1..self.stride {
            let p = self.inner[x as usize].parent;
            if p == NIL {
                break;
            }
            x = p;
        }
        x
    }

    /// Recomputes the stride and every link.
    pub(crate) fn relink_all(&mut self) {
        self.stride = stride_for(self.len());
        self.stats.global_relinks += 1;
        if let Some(r) = self.root {
            self.relink_from(r, Vec::new());
        }
    }

    /// Recomputes the links of every node in the subtree of `v`.
    pub(crate) fn relink_subtree(&mut self, v: u32) {
        let mut path = Vec::new();
        let mut x = self.inner[v as usize].parent;
        while x != NIL {
            path.push(x);
            x = self.inner[x as usize].parent;
        }
        path.reverse();
        self.relink_from(NodeRef::Inner(NodeId(v)), path);
    }

    fn relink_from(&mut self, start: NodeRef, mut path: Vec<u32>) {
        let base = path.len();
        let stride = self.stride as usize;
        let mut stack = vec![(start, base)];
        while let Some((node, depth)) = stack.pop() {
            path.truncate(depth);
            let anc = if depth == 0 {
                NIL
            } else if depth >= stride {
                path[depth - stride]
            } else {
                path[0]
            };
            self.set_anc(node, anc);
            if let NodeRef::Inner(v) = node {
                path.push(v.0);
                for i in 0..self.inner[v.0 as usize].children.len() {
                    stack.push((self.child(v.0, i), depth + 1));
                }
            }
        }
    }

    pub(crate) fn link_leaf(&mut self, l: u32) {
        let node = NodeRef::Leaf(LeafId(l));
        let anc = self.expected_anc(node);
        self.set_anc(node, anc);
    }

    fn covers(&self, v: u32, key: &K) -> bool {
        let n = &self.inner[v as usize];
        n.lo <= *key && *key <= n.hi
    }

    /// Lowest common ancestor of two distinct leaves.
    pub fn lca(&self, a: LeafId, b: LeafId) -> Result<NodeId> {
        if a == b {
            return Err(Error::Precondition("lca of a leaf with itself".into()));
        }
        Ok(NodeId(self.lca_raw(a.0, b.0)))
    }

    fn lca_raw(&self, a: u32, b: u32) -> u32 {
        let target = self.leaves[b as usize].key;
        let mut x = self.leaves[a as usize].parent;
        if self.covers(x, &target) {
            return x;
        }
        loop {
            let up = self.inner[x as usize].anc;
            if up == NIL || self.covers(up, &target) {
                break;
            }
            x = up;
        }
        while !self.covers(x, &target) {
            x = self.inner[x as usize].parent;
        }
        x
    }

    /// Nodes of the canonical decomposition of `[key(a), key(b)]` lying in
    /// its `z` highest distinct heights, found through LCA computations
    /// without visiting the lower levels.
    pub fn findtop(&self, a: LeafId, b: LeafId, z: usize) -> FindTop {
        let mut out = Vec::new();
        let mut calls = 0;
        if z > 0 {
            let (a, b) = if self.leaves[a.0 as usize].key <= self.leaves[b.0 as usize].key {
                (a.0, b.0)
            } else {
                (b.0, a.0)
            };
            self.findtop_rec(a, b, z, &mut out, &mut calls);
        }
        let set = CanonicalSet {
            nodes: out
                .into_iter()
                .map(|node| Canonical {
                    node,
                    height: self.height_of(node),
                    weight: self.weight_of(node),
                })
                .collect(),
        };
        FindTop {
            nodes: set.top(z),
            lca_calls: calls,
        }
    }

    fn findtop_rec(&self, a: u32, b: u32, z: usize, out: &mut Vec<NodeRef>, calls: &mut usize) {
        if a == b {
            out.push(NodeRef::Leaf(LeafId(a)));
            return;
        }
        *calls += 1;
        let w = self.lca_raw(a, b);
        let node = &self.inner[w as usize];
        if node.min_leaf == a && node.max_leaf == b {
            out.push(NodeRef::Inner(NodeId(w)));
            return;
        }
        let j = self.child_index(w, &self.leaves[a as usize].key);
        let k = self.child_index(w, &self.leaves[b as usize].key);
        let (cj, ck) = (self.child(w, j), self.child(w, k));
        let a_full = self.min_leaf_of(cj) == a;
        let b_full = self.max_leaf_of(ck) == b;
        let mut rest = z;
        if a_full || b_full || k - j > 1 {
            if a_full {
                out.push(cj);
            }
            out.extend((j + 1..k).map(|i| self.child(w, i)));
            if b_full {
                out.push(ck);
            }
            rest -= 1;
        }
        if rest == 0 {
            return;
        }
        if !a_full {
            self.findtop_rec(a, self.max_leaf_of(cj), rest, out, calls);
        }
        if !b_full {
            self.findtop_rec(self.min_leaf_of(ck), b, rest, out, calls);
        }
    }

    /// Every stored link matches a parent walk with the current stride.
    pub fn audit_links(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return Ok(());
        };
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            let (got, want) = (self.anc_raw(node), self.expected_anc(node));
            if got != want {
                return Err(format!("{node:?} links to {got}, expected {want}"));
            }
            if let NodeRef::Inner(v) = node {
                for i in 0..self.inner[v.0 as usize].children.len() {
                    stack.push(self.child(v.0, i));
                }
            }
        }
        Ok(())
    }
}
