//! Dynamic array of colours with positional updates and interval
//! α-majority queries.
//!
//! Each position carries an integer label, strictly increasing along the
//! array, and the labels are the coordinates of a one-dimensional index.
//! A new element takes the midpoint of its neighbours' labels; when they
//! are adjacent, the smallest aligned label block around the insertion
//! point whose density is below a threshold is respread evenly and the
//! affected keys are moved in the index.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::index::{MajorityIndex, QueryAnswer};
use crate::params::{AlphaConfig, Rational};

/// Labels live in `(0, 2^LABEL_BITS)`.
pub const LABEL_BITS: u32 = 62;
const UNIVERSE: u64 = 1 << LABEL_BITS;

/// Relabelling counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelabelStats {
    /// Blocks respread.
    pub relabels: u64,
    /// Respreads covering the whole label universe.
    pub global_relabels: u64,
    /// Existing keys moved to a new label.
    pub moved_keys: u64,
}

#[derive(Debug, Clone)]
pub struct MajorityArray<L> {
    engine: MajorityIndex<u64, L>,
    stats: RelabelStats,
}

impl<L: Ord + Clone + Debug> MajorityArray<L> {
    pub fn new(config: AlphaConfig) -> Self {
        Self {
            engine: MajorityIndex::new(config),
            stats: RelabelStats::default(),
        }
    }

    pub fn with_alpha(alpha: Rational) -> Result<Self> {
        Ok(Self::new(AlphaConfig::new(alpha)?))
    }

    /// Array holding `colours` in order, with evenly spaced labels.
    pub fn from_colours(config: AlphaConfig, colours: Vec<L>) -> Result<Self> {
        let n = colours.len() as u64;
        let points = colours
            .into_iter()
            .enumerate()
            .map(|(k, c)| (spread(0, UNIVERSE, n, k as u64), c))
            .collect();
        Ok(Self {
            engine: MajorityIndex::build(config, points)?,
            stats: RelabelStats::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.engine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.engine.is_empty()
    }

    pub fn config(&self) -> &AlphaConfig {
        self.engine.config()
    }

    pub fn stats(&self) -> RelabelStats {
        self.stats
    }

    pub fn engine(&self) -> &MajorityIndex<u64, L> {
        &self.engine
    }

    fn check(&self, pos: usize, len: usize) -> Result<()> {
        if pos == 0 || pos > len {
            return Err(Error::OutOfBounds { pos, len: self.len() });
        }
        Ok(())
    }

    /// Label of 1-based position `pos`.
    pub fn label(&self, pos: usize) -> Result<u64> {
        self.check(pos, self.len())?;
        Ok(self.engine.select(pos - 1).expect("position in bounds"))
    }

    pub fn get(&self, pos: usize) -> Result<&L> {
        let key = self.label(pos)?;
        Ok(self.engine.colour_at(&key).expect("label is stored"))
    }

    pub fn to_vec(&self) -> Vec<L> {
        self.engine.points().into_iter().map(|p| p.1).collect()
    }

    /// Inserts `colour` so that it becomes position `pos` (1-based).
    pub fn insert(&mut self, pos: usize, colour: L) -> Result<()> {
        self.check(pos, self.len() + 1)?;
        let left = if pos > 1 { self.label(pos - 1)? } else { 0 };
        let right = if pos <= self.len() { self.label(pos)? } else { UNIVERSE };
        let key = if right - left >= 2 {
            left + (right - left) / 2
        } else {
            self.make_room(left, right)?
        };
        self.engine.insert(key, colour)
    }

    /// Respreads the smallest sparse enough block around the gap between
    /// the adjacent labels `left < right` and returns the label reserved
    /// for the new element.
    fn make_room(&mut self, left: u64, right: u64) -> Result<u64> {
        let anchor = if left > 0 { left } else { right };
        for j in 1..=LABEL_BITS {
            let size = 1u64 << j;
            let base = anchor & !(size - 1);
            let count = self.engine.count(&base, &(base + size - 1));
            // Density threshold 1 - j / (2 · LABEL_BITS), tightening with block size.
            let fits = (count as u128 + 1) * 2 * LABEL_BITS as u128
                <= (2 * LABEL_BITS - j) as u128 * size as u128;
            if !fits {
                continue;
            }
            let old = self.keys_between(base, base + size - 1);
            let slot = old.partition_point(|&k| k <= left);
            let slots = old.len() as u64 + 1;
            let mut moves = Vec::new();
            let mut reserved = 0;
            for k in 0..slots {
                let label = spread(base, size, slots, k);
                let idx = k as usize;
                if idx == slot {
                    reserved = label;
                } else {
                    let prev = old[if idx < slot { idx } else { idx - 1 }];
                    if prev != label {
                        moves.push((prev, label));
                    }
                }
            }
            self.stats.relabels += 1;
            self.stats.global_relabels += (j == LABEL_BITS) as u64;
            self.stats.moved_keys += moves.len() as u64;
            self.engine.move_keys(&moves)?;
            return Ok(reserved);
        }
        Err(Error::UniverseExhausted)
    }

    fn keys_between(&self, lo: u64, hi: u64) -> Vec<u64> {
        let first = if lo == 0 { 0 } else { self.engine.count(&0, &(lo - 1)) as usize };
        let n = self.engine.count(&lo, &hi) as usize;
        (first..first + n)
            .map(|r| self.engine.select(r).expect("rank in range"))
            .collect()
    }

    /// Removes position `pos` and returns its colour.
    pub fn delete(&mut self, pos: usize) -> Result<L> {
        let key = self.label(pos)?;
        self.engine.delete(&key)
    }

    /// Replaces the colour at `pos`, returning the old one.
    pub fn modify(&mut self, pos: usize, colour: L) -> Result<L> {
        let key = self.label(pos)?;
        let old = self.engine.delete(&key)?;
        self.engine.insert(key, colour)?;
        Ok(old)
    }

    /// Colours of more than an `alpha` fraction of positions `i..=j`.
    pub fn query(&mut self, i: usize, j: usize) -> Result<Vec<L>> {
        Ok(self.query_counts(i, j)?.labels())
    }

    pub fn query_counts(&mut self, i: usize, j: usize) -> Result<QueryAnswer<L>> {
        self.check(i, self.len())?;
        self.check(j, self.len())?;
        if i > j {
            return Err(Error::Precondition("interval start after its end".into()));
        }
        let (a, b) = (self.label(i)?, self.label(j)?);
        self.engine.query_counts(&a, &b)
    }

    /// Labels strictly increasing inside the universe, plus the engine audit.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let labels: Vec<u64> = self.engine.points().into_iter().map(|p| p.0).collect();
        if labels.first().is_some_and(|&l| l == 0) || labels.last().is_some_and(|&l| l >= UNIVERSE) {
            return Err("label outside the universe".into());
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err("labels not strictly increasing".into());
        }
        self.engine.audit()
    }
}

/// Label of slot `k` among `slots` evenly spread over `(base, base + size)`.
fn spread(base: u64, size: u64, slots: u64, k: u64) -> u64 {
    base + ((k as u128 + 1) * size as u128 / (slots as u128 + 1)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::naive_array_majority;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn array(p: u64, q: u64) -> MajorityArray<char> {
        MajorityArray::with_alpha(Rational::new(p, q)).unwrap()
    }

    #[test]
    fn small_examples() {
        let mut a = array(1, 2);
        a.insert(1, 'r').unwrap();
        assert_eq!(a.len(), 1);
        a.insert(2, 'r').unwrap();
        a.insert(2, 'b').unwrap();
        assert_eq!(a.to_vec(), vec!['r', 'b', 'r']);
        assert_eq!(a.query(1, 3).unwrap(), vec!['r']);
        assert_eq!(a.query(2, 2).unwrap(), vec!['b']);
        assert!(a.query(1, 2).unwrap().is_empty());
        assert_eq!(a.modify(2, 'g'), Ok('b'));
        assert_eq!(a.query(2, 2).unwrap(), vec!['g']);
        assert!(matches!(a.insert(5, 'x'), Err(Error::OutOfBounds { .. })));
        assert!(matches!(a.query(0, 1), Err(Error::OutOfBounds { .. })));
        for _ in 0..3 {
            a.delete(1).unwrap();
        }
        assert!(a.is_empty());
        assert!(a.delete(1).is_err());
        a.audit().unwrap();
    }

    #[test]
    fn repeated_front_and_middle_inserts_relabel() {
        let mut a = array(1, 4);
        let mut naive = Vec::new();
        for i in 0..3000usize {
            let c = (b'a' + (i % 5) as u8) as char;
            let pos = if i % 2 == 0 { 1 } else { naive.len() / 2 + 1 };
            a.insert(pos, c).unwrap();
            naive.insert(pos - 1, c);
        }
        assert!(a.stats().relabels > 0);
        a.audit().unwrap();
        assert_eq!(a.to_vec(), naive);
        let alpha = Rational::new(1, 4);
        for (i, j) in [(1, 3000), (1, 1), (700, 2200), (1500, 1501)] {
            assert_eq!(a.query(i, j).unwrap(), naive_array_majority(&naive, i, j, alpha));
        }
    }

    #[test]
    fn random_ops_match_naive_array() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = Rational::new(1, 3);
        let mut a = MajorityArray::with_alpha(alpha).unwrap();
        let mut naive: Vec<u8> = Vec::new();
        for step in 0..4000 {
            let roll = rng.random_range(0..10);
            if roll < 4 || naive.is_empty() {
                let pos = rng.random_range(1..=naive.len() + 1);
                let c = rng.random_range(0..4);
                a.insert(pos, c).unwrap();
                naive.insert(pos - 1, c);
            } else if roll < 6 {
                let pos = rng.random_range(1..=naive.len());
                assert_eq!(a.delete(pos), Ok(naive.remove(pos - 1)));
            } else if roll < 7 {
                let pos = rng.random_range(1..=naive.len());
                let c = rng.random_range(0..4);
                a.modify(pos, c).unwrap();
                naive[pos - 1] = c;
            } else {
                let i = rng.random_range(1..=naive.len());
                let j = rng.random_range(i..=naive.len());
                assert_eq!(a.query(i, j).unwrap(), naive_array_majority(&naive, i, j, alpha), "step {step}");
            }
            if step % 500 == 0 {
                a.audit().unwrap();
                assert_eq!(a.to_vec(), naive);
            }
        }
    }

    #[test]
    fn bulk_construction() {
        let cfg = AlphaConfig::new(Rational::new(1, 2)).unwrap();
        let mut a = MajorityArray::from_colours(cfg, vec!['x', 'y', 'x', 'x']).unwrap();
        assert_eq!(a.query(1, 4).unwrap(), vec!['x']);
        a.insert(3, 'y').unwrap();
        assert_eq!(a.to_vec(), vec!['x', 'y', 'y', 'x', 'x']);
        a.audit().unwrap();
    }
}
