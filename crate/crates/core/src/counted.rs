//! Ordered multiset with range counting.
//!
//! A B+-tree whose branch entries carry the maximum key and the number of
//! stored keys below each child. Real coordinates use a moderate fanout;
//! word-sized integers use a wide one so that the depth behaves like
//! `lg n / lg fanout`.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Fanout used for comparison-only coordinates.
pub const COMPARISON_FANOUT: usize = 16;
/// Fanout used for word-sized integer coordinates.
pub const WORD_FANOUT: usize = 64;

#[derive(Clone, Debug)]
enum Node<K> {
    Leaf {
        keys: Vec<K>,
        mult: Vec<u32>,
    },
    Branch {
        maxes: Vec<K>,
        counts: Vec<usize>,
        kids: Vec<Node<K>>,
    },
}

impl<K: Ord + Copy + Debug> Node<K> {
    fn entries(&self) -> usize {
        match self {
            Node::Leaf { keys, .. } => keys.len(),
            Node::Branch { kids, .. } => kids.len(),
        }
    }

    fn total(&self) -> usize {
        match self {
            Node::Leaf { mult, .. } => mult.iter().map(|&m| m as usize).sum(),
            Node::Branch { counts, .. } => counts.iter().sum(),
        }
    }

    fn max_key(&self) -> K {
        match self {
            Node::Leaf { keys, .. } => *keys.last().expect("non-empty leaf"),
            Node::Branch { maxes, .. } => *maxes.last().expect("non-empty branch"),
        }
    }

    fn split_half(&mut self) -> Node<K> {
        match self {
            Node::Leaf { keys, mult } => {
                let mid = keys.len() / 2;
                Node::Leaf {
                    keys: keys.split_off(mid),
                    mult: mult.split_off(mid),
                }
            }
            Node::Branch { maxes, counts, kids } => {
                let mid = kids.len() / 2;
                Node::Branch {
                    maxes: maxes.split_off(mid),
                    counts: counts.split_off(mid),
                    kids: kids.split_off(mid),
                }
            }
        }
    }

    fn absorb(&mut self, other: Node<K>) {
        match (self, other) {
            (Node::Leaf { keys, mult }, Node::Leaf { keys: k2, mult: m2 }) => {
                keys.extend(k2);
                mult.extend(m2);
            }
            (
                Node::Branch { maxes, counts, kids },
                Node::Branch {
                    maxes: x2,
                    counts: c2,
                    kids: k2,
                },
            ) => {
                maxes.extend(x2);
                counts.extend(c2);
                kids.extend(k2);
            }
            _ => unreachable!("siblings share a level"),
        }
    }

    fn insert(&mut self, key: K, fanout: usize) -> Option<Node<K>> {
        match self {
            Node::Leaf { keys, mult } => {
                let pos = keys.partition_point(|k| *k < key);
                if pos < keys.len() && keys[pos] == key {
                    mult[pos] += 1;
                    return None;
                }
                keys.insert(pos, key);
                mult.insert(pos, 1);
            }
            Node::Branch { maxes, counts, kids } => {
                let i = maxes.partition_point(|m| *m < key).min(kids.len() - 1);
                counts[i] += 1;
                if maxes[i] < key {
                    maxes[i] = key;
                }
                if let Some(right) = kids[i].insert(key, fanout) {
                    let moved = right.total();
                    counts[i] -= moved;
                    maxes[i] = kids[i].max_key();
                    maxes.insert(i + 1, right.max_key());
                    counts.insert(i + 1, moved);
                    kids.insert(i + 1, right);
                }
            }
        }
        (self.entries() > fanout).then(|| self.split_half())
    }

    fn remove(&mut self, key: &K, fanout: usize) -> bool {
        match self {
            Node::Leaf { keys, mult } => {
                let pos = keys.partition_point(|k| k < key);
                if pos == keys.len() || keys[pos] != *key {
                    return false;
                }
                mult[pos] -= 1;
                if mult[pos] == 0 {
                    keys.remove(pos);
                    mult.remove(pos);
                }
                true
            }
            Node::Branch { maxes, counts, kids } => {
                let i = maxes.partition_point(|m| m < key);
                if i == kids.len() || !kids[i].remove(key, fanout) {
                    return false;
                }
                counts[i] -= 1;
                if kids[i].entries() == 0 {
                    maxes.remove(i);
                    counts.remove(i);
                    kids.remove(i);
                    return true;
                }
                maxes[i] = kids[i].max_key();
                if kids[i].entries() < (fanout / 4).max(1) && kids.len() > 1 {
                    let left = if i + 1 < kids.len() { i } else { i - 1 };
                    let right_node = kids.remove(left + 1);
                    maxes.remove(left + 1);
                    counts.remove(left + 1);
                    kids[left].absorb(right_node);
                    if kids[left].entries() > fanout {
                        let right = kids[left].split_half();
                        maxes.insert(left + 1, right.max_key());
                        counts.insert(left + 1, right.total());
                        kids.insert(left + 1, right);
                    }
                    maxes[left] = kids[left].max_key();
                    counts[left] = kids[left].total();
                }
                true
            }
        }
    }

    fn rank_lt(&self, key: &K) -> usize {
        match self {
            Node::Leaf { keys, mult } => {
                let pos = keys.partition_point(|k| k < key);
                mult[..pos].iter().map(|&m| m as usize).sum()
            }
            Node::Branch { maxes, counts, kids } => {
                let i = maxes.partition_point(|m| m < key);
                let below: usize = counts[..i].iter().sum();
                below + kids.get(i).map_or(0, |k| k.rank_lt(key))
            }
        }
    }

    fn rank_le(&self, key: &K) -> usize {
        match self {
            Node::Leaf { keys, mult } => {
                let pos = keys.partition_point(|k| k <= key);
                mult[..pos].iter().map(|&m| m as usize).sum()
            }
            Node::Branch { maxes, counts, kids } => {
                let i = maxes.partition_point(|m| m <= key);
                let below: usize = counts[..i].iter().sum();
                below + kids.get(i).map_or(0, |k| k.rank_le(key))
            }
        }
    }

    /// Counts keys in `[lo, hi]`; `floor` is a strict lower bound on every
    /// key below this node when known.
    fn count_within(&self, lo: &K, hi: &K, floor: Option<&K>) -> usize {
        match self {
            Node::Leaf { keys, mult } => keys
                .iter()
                .zip(mult)
                .filter(|(k, _)| lo <= *k && *k <= hi)
                .map(|(_, &m)| m as usize)
                .sum(),
            Node::Branch { maxes, counts, kids } => {
                let mut total = 0;
                let mut below = floor;
                for ((max, &count), kid) in maxes.iter().zip(counts).zip(kids) {
                    let starts_inside = below.is_some_and(|b| b >= lo);
                    if starts_inside && max <= hi {
                        total += count;
                    } else if below.is_none_or(|b| b < hi) && max >= lo {
                        total += kid.count_within(lo, hi, below);
                    }
                    if below.is_some_and(|b| b >= hi) {
                        break;
                    }
                    below = Some(max);
                }
                total
            }
        }
    }

    fn predecessor(&self, x: &K) -> Option<K> {
        match self {
            Node::Leaf { keys, .. } => {
                let pos = keys.partition_point(|k| k <= x);
                pos.checked_sub(1).map(|p| keys[p])
            }
            Node::Branch { maxes, kids, .. } => {
                let i = maxes.partition_point(|m| m <= x);
                if i == kids.len() {
                    return maxes.last().copied();
                }
                kids[i]
                    .predecessor(x)
                    .or_else(|| i.checked_sub(1).map(|p| maxes[p]))
            }
        }
    }

    fn successor(&self, x: &K) -> Option<K> {
        match self {
            Node::Leaf { keys, .. } => keys.get(keys.partition_point(|k| k < x)).copied(),
            Node::Branch { maxes, kids, .. } => {
                let i = maxes.partition_point(|m| m < x);
                kids.get(i).and_then(|k| k.successor(x))
            }
        }
    }

    fn select(&self, mut rank: usize) -> Option<K> {
        match self {
            Node::Leaf { keys, mult } => {
                for (k, &m) in keys.iter().zip(mult) {
                    if rank < m as usize {
                        return Some(*k);
                    }
                    rank -= m as usize;
                }
                None
            }
            Node::Branch { counts, kids, .. } => {
                for (&c, kid) in counts.iter().zip(kids) {
                    if rank < c {
                        return kid.select(rank);
                    }
                    rank -= c;
                }
                None
            }
        }
    }

    fn visit_range(&self, lo: &K, hi: &K, f: &mut impl FnMut(K, usize)) {
        match self {
            Node::Leaf { keys, mult } => {
                let start = keys.partition_point(|k| k < lo);
                for (k, &m) in keys[start..].iter().zip(&mult[start..]) {
                    if k > hi {
                        break;
                    }
                    f(*k, m as usize);
                }
            }
            Node::Branch { maxes, kids, .. } => {
                let start = maxes.partition_point(|m| m < lo);
                for i in start..kids.len() {
                    kids[i].visit_range(lo, hi, f);
                    if maxes[i] >= *hi {
                        break;
                    }
                }
            }
        }
    }

    fn check(&self, fanout: usize, is_root: bool) -> usize {
        match self {
            Node::Leaf { keys, mult } => {
                assert!(keys.windows(2).all(|w| w[0] < w[1]));
                assert!(mult.iter().all(|&m| m > 0));
                assert!(keys.len() <= fanout);
                self.total()
            }
            Node::Branch { maxes, counts, kids } => {
                assert!(kids.len() <= fanout);
                assert!(is_root || !kids.is_empty());
                assert!(maxes.windows(2).all(|w| w[0] < w[1]));
                for ((m, &c), k) in maxes.iter().zip(counts).zip(kids) {
                    assert_eq!(k.max_key(), *m);
                    assert_eq!(k.check(fanout, false), c);
                }
                self.total()
            }
        }
    }
}

/// Ordered multiset of coordinates supporting rank and range counting.
#[derive(Clone, Debug)]
pub struct CountedSet<K> {
    root: Node<K>,
    len: usize,
    fanout: usize,
}

impl<K: Ord + Copy + Debug> Default for CountedSet<K> {
    fn default() -> Self {
        Self::with_fanout(COMPARISON_FANOUT)
    }
}

impl<K: Ord + Copy + Debug> CountedSet<K> {
    pub fn with_fanout(fanout: usize) -> Self {
        assert!(fanout >= 4, "fanout must be at least 4");
        Self {
            root: Node::Leaf {
                keys: Vec::new(),
                mult: Vec::new(),
            },
            len: 0,
            fanout,
        }
    }

    /// Builds from keys in non-decreasing order.
    pub fn from_sorted(fanout: usize, keys: impl IntoIterator<Item = K>) -> Self {
        let mut set = Self::with_fanout(fanout);
        for k in keys {
            set.insert(k);
        }
        set
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, key: K) {
        if let Some(right) = self.root.insert(key, self.fanout) {
            let left = std::mem::replace(
                &mut self.root,
                Node::Leaf {
                    keys: Vec::new(),
                    mult: Vec::new(),
                },
            );
            self.root = Node::Branch {
                maxes: vec![left.max_key(), right.max_key()],
                counts: vec![left.total(), right.total()],
                kids: vec![left, right],
            };
        }
        self.len += 1;
    }

    /// Removes one occurrence of `key`.
    pub fn remove(&mut self, key: &K) -> Result<()> {
        if !self.root.remove(key, self.fanout) {
            return Err(Error::NotFound);
        }
        self.len -= 1;
        loop {
            match &mut self.root {
                Node::Branch { kids, .. } if kids.len() == 1 => {
                    let only = kids.pop().expect("one child");
                    self.root = only;
                }
                Node::Branch { kids, .. } if kids.is_empty() => {
                    self.root = Node::Leaf {
                        keys: Vec::new(),
                        mult: Vec::new(),
                    };
                }
                _ => break,
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &K) -> bool {
        self.count_range(key, key) > 0
    }

    /// Number of stored keys strictly below `key`.
    pub fn rank_lt(&self, key: &K) -> usize {
        self.root.rank_lt(key)
    }

    /// Number of stored keys at or below `key`.
    pub fn rank_le(&self, key: &K) -> usize {
        self.root.rank_le(key)
    }

    /// Number of stored keys in the closed range `[lo, hi]`; zero when `lo > hi`.
    pub fn count_range(&self, lo: &K, hi: &K) -> usize {
        if lo > hi {
            return 0;
        }
        self.rank_le(hi) - self.rank_lt(lo)
    }

    /// Same count as [`count_range`](Self::count_range), by a single
    /// descent that adds whole children lying inside the range.
    pub fn count_range_direct(&self, lo: &K, hi: &K) -> usize {
        if lo > hi {
            return 0;
        }
        self.root.count_within(lo, hi, None)
    }

    /// Largest stored key `≤ x`.
    pub fn predecessor(&self, x: &K) -> Option<K> {
        self.root.predecessor(x)
    }

    /// Smallest stored key `≥ x`.
    pub fn successor(&self, x: &K) -> Option<K> {
        self.root.successor(x)
    }

    /// The key of 0-based rank `rank`, counting multiplicity.
    pub fn select(&self, rank: usize) -> Option<K> {
        self.root.select(rank)
    }

    pub fn first(&self) -> Option<K> {
        self.select(0)
    }

    pub fn last(&self) -> Option<K> {
        self.len.checked_sub(1).and_then(|r| self.select(r))
    }

    /// Distinct keys in `[lo, hi]` with their multiplicities, in order.
    pub fn range(&self, lo: &K, hi: &K) -> Vec<(K, usize)> {
        let mut out = Vec::new();
        if lo <= hi {
            self.root.visit_range(lo, hi, &mut |k, m| out.push((k, m)));
        }
        out
    }

    /// Every key in order, repeated by multiplicity.
    pub fn to_vec(&self) -> Vec<K> {
        let mut out = Vec::with_capacity(self.len);
        fn walk<K: Ord + Copy>(n: &Node<K>, out: &mut Vec<K>) {
            match n {
                Node::Leaf { keys, mult } => {
                    for (k, &m) in keys.iter().zip(mult) {
                        out.extend(std::iter::repeat_n(*k, m as usize));
                    }
                }
                Node::Branch { kids, .. } => kids.iter().for_each(|k| walk(k, out)),
            }
        }
        walk(&self.root, &mut out);
        out
    }

    /// Panics if a structural invariant is broken.
    pub fn check_invariants(&self) {
        assert_eq!(self.root.check(self.fanout, true), self.len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set_of(keys: &[i64]) -> CountedSet<i64> {
        let mut s = CountedSet::with_fanout(4);
        keys.iter().for_each(|&k| s.insert(k));
        s
    }

    #[test]
    fn insert_and_count() {
        let mut s = CountedSet::default();
        s.insert(5);
        assert_eq!(s.count_range(&5, &5), 1);
        s.insert(5);
        assert_eq!(s.count_range(&5, &5), 2);
        assert_eq!(set_of(&[1, 3, 9]).count_range(&2, &9), 2);
    }

    #[test]
    fn delete() {
        let mut s = set_of(&[5, 5]);
        s.remove(&5).unwrap();
        assert_eq!(s.count_range(&5, &5), 1);
        assert_eq!(set_of(&[5]).remove(&4), Err(Error::NotFound));
        let mut s = set_of(&[1, 2, 3]);
        s.remove(&2).unwrap();
        s.insert(2);
        assert_eq!(s.to_vec(), vec![1, 2, 3]);
    }

    #[test]
    fn count_examples() {
        let s = set_of(&[1, 2, 3]);
        assert_eq!(s.count_range(&1, &3), 3);
        assert_eq!(s.count_range(&4, &9), 0);
        assert_eq!(s.count_range(&3, &1), 0);
        assert_eq!(set_of(&[2, 4, 4, 7]).count_range(&3, &6), 2);
    }

    #[test]
    fn neighbours() {
        let s = set_of(&[1, 5, 9]);
        assert_eq!(s.successor(&2), Some(5));
        assert_eq!(s.predecessor(&0), None);
        assert_eq!(s.predecessor(&5), Some(5));
        assert_eq!(s.successor(&10), None);
        assert_eq!(s.predecessor(&100), Some(9));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(i64),
        Remove(i64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            3 => (0i64..200).prop_map(Op::Insert),
            2 => (0i64..200).prop_map(Op::Remove),
        ]
    }

    proptest! {
        #[test]
        fn matches_sorted_vec(ops in proptest::collection::vec(op(), 1..400),
                              probes in proptest::collection::vec((0i64..210, 0i64..210), 20),
                              fanout in 4usize..70) {
            let mut s = CountedSet::with_fanout(fanout);
            let mut reference: Vec<i64> = Vec::new();
            for op in ops {
                match op {
                    Op::Insert(k) => {
                        s.insert(k);
                        let pos = reference.partition_point(|&x| x < k);
                        reference.insert(pos, k);
                    }
                    Op::Remove(k) => {
                        let expect = reference.binary_search(&k).ok();
                        let got = s.remove(&k);
                        prop_assert_eq!(got.is_ok(), expect.is_some());
                        if let Some(p) = expect { reference.remove(p); }
                    }
                }
            }
            s.check_invariants();
            prop_assert_eq!(s.len(), reference.len());
            prop_assert_eq!(s.to_vec(), reference.clone());
            for (a, b) in probes {
                let naive = reference.iter().filter(|&&x| a <= x && x <= b).count();
                prop_assert_eq!(s.count_range(&a, &b), naive);
                prop_assert_eq!(s.count_range_direct(&a, &b), naive);
                prop_assert_eq!(s.predecessor(&a), reference.iter().rev().find(|&&x| x <= a).copied());
                prop_assert_eq!(s.successor(&a), reference.iter().find(|&&x| x >= a).copied());
                if (a as usize) < reference.len() {
                    prop_assert_eq!(s.select(a as usize), Some(reference[a as usize]));
                }
            }
        }
    }
}
