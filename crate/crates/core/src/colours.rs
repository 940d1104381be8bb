//! Dense colour identifiers and the scratch counter array.
//!
//! External labels are interned into ids in `[1, capacity]` where the
//! capacity never stays above twice the number of stored points: once
//! deletions push it past that bound, every live colour is renumbered into
//! `[1, live]` and the owner applies the returned [`Remap`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Dense colour identifier, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColourId(pub u32);

impl ColourId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Old-id to new-id table produced by a global renumbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Remap {
    table: Vec<u32>,
}

impl Remap {
    /// New id for `old`; `None` for ids that were not live.
    pub fn get(&self, old: ColourId) -> Option<ColourId> {
        match self.table.get(old.index()) {
            Some(&n) if n != 0 => Some(ColourId(n)),
            _ => None,
        }
    }

    /// Like [`get`](Self::get) but panics on retired ids.
    pub fn apply(&self, old: ColourId) -> ColourId {
        self.get(old).expect("remapped colour must be live")
    }

    /// Rearranges a vector indexed by old ids into one indexed by new ids.
    pub fn permute<T: Default>(&self, slots: &mut Vec<T>, new_len: usize) {
        let mut out: Vec<T> = (0..new_len).map(|_| T::default()).collect();
        for (old, slot) in slots.iter_mut().enumerate() {
            if let Some(new) = self.table.get(old).filter(|&&n| n != 0) {
                out[*new as usize] = std::mem::take(slot);
            }
        }
        *slots = out;
    }
}

/// Zero-initialised counters indexed by colour id.
#[derive(Debug, Clone, Default)]
pub struct ScratchCounters {
    slots: Vec<u64>,
    touched: Vec<ColourId>,
}

impl ScratchCounters {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            slots: vec![0; capacity + 1],
            touched: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len().saturating_sub(1)
    }

    pub(crate) fn ensure(&mut self, capacity: usize) {
        if self.slots.len() < capacity + 1 {
            self.slots.resize(capacity + 1, 0);
        }
    }

    pub(crate) fn shrink(&mut self, capacity: usize) {
        assert!(self.is_clean(), "scratch resized while in use");
        self.slots.truncate(capacity + 1);
        self.slots.resize(capacity + 1, 0);
    }

    pub fn bump(&mut self, id: ColourId, delta: u64) {
        assert!(
            id.0 >= 1 && id.index() < self.slots.len(),
            "colour id {} outside scratch array",
            id.0
        );
        let slot = &mut self.slots[id.index()];
        if *slot == 0 && delta > 0 {
            self.touched.push(id);
        }
        *slot += delta;
    }

    pub fn read(&self, id: ColourId) -> u64 {
        assert!(id.index() < self.slots.len(), "colour id {} outside scratch array", id.0);
        self.slots[id.index()]
    }

    /// Returns every touched `(id, total)` and zeroes those slots.
    pub fn drain(&mut self) -> Vec<(ColourId, u64)> {
        let mut out = Vec::with_capacity(self.touched.len());
        self.drain_into(&mut out);
        out
    }

    pub fn drain_into(&mut self, out: &mut Vec<(ColourId, u64)>) {
        for id in self.touched.drain(..) {
            let slot = &mut self.slots[id.index()];
            out.push((id, *slot));
            *slot = 0;
        }
    }

    /// Nothing written since the last drain.
    pub fn is_clean(&self) -> bool {
        self.touched.is_empty()
    }

    /// Full scan of every slot; for audits.
    pub fn all_zero(&self) -> bool {
        self.touched.is_empty() && self.slots.iter().all(|&s| s == 0)
    }
}

/// Bidirectional label ↔ id mapping with per-colour point counts.
#[derive(Debug, Clone)]
pub struct ColourRegistry<L> {
    index: BTreeMap<L, ColourId>,
    labels: Vec<Option<L>>,
    refcounts: Vec<u32>,
    free: Vec<ColourId>,
    points: usize,
    remaps: u64,
    pub(crate) scratch: ScratchCounters,
}

impl<L: Ord + Clone> Default for ColourRegistry<L> {
    fn default() -> Self {
        Self::new()
    }
}

impl<L: Ord + Clone> ColourRegistry<L> {
    pub fn new() -> Self {
        Self {
            index: BTreeMap::new(),
            labels: vec![None],
            refcounts: vec![0],
            free: Vec::new(),
            points: 0,
            remaps: 0,
            scratch: ScratchCounters::with_capacity(0),
        }
    }

    /// Highest id ever handed out since the last renumbering.
    pub fn capacity(&self) -> usize {
        self.labels.len() - 1
    }

    /// Distinct colours currently assigned to at least one point.
    pub fn live_count(&self) -> usize {
        self.index.len()
    }

    /// Points currently registered (sum of all refcounts).
    pub fn point_count(&self) -> usize {
        self.points
    }

    /// Number of global renumberings performed so far.
    pub fn remap_count(&self) -> u64 {
        self.remaps
    }

    pub fn lookup(&self, label: &L) -> Option<ColourId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: ColourId) -> Option<&L> {
        self.labels.get(id.index()).and_then(Option::as_ref)
    }

    pub fn refcount(&self, id: ColourId) -> u32 {
        self.refcounts.get(id.index()).copied().unwrap_or(0)
    }

    pub fn scratch(&self) -> &ScratchCounters {
        &self.scratch
    }

    pub fn scratch_mut(&mut self) -> &mut ScratchCounters {
        &mut self.scratch
    }

    /// Registers one more point of colour `label`.
    pub fn intern(&mut self, label: L) -> ColourId {
        self.points += 1;
        if let Some(&id) = self.index.get(&label) {
            self.refcounts[id.index()] += 1;
            return id;
        }
        let id = match self.free.pop() {
            Some(id) => {
                self.labels[id.index()] = Some(label.clone());
                self.refcounts[id.index()] = 1;
                id
            }
            None => {
                self.labels.push(Some(label.clone()));
                self.refcounts.push(1);
                ColourId(self.capacity() as u32)
            }
        };
        self.scratch.ensure(self.capacity());
        self.index.insert(label, id);
        id
    }

    /// Drops one point of colour `id`. Returns the renumbering to apply when
    /// the id space had grown past twice the point count.
    pub fn release(&mut self, id: ColourId) -> Result<Option<Remap>> {
        if self.refcount(id) == 0 {
            return Err(Error::UnknownColour(id.0));
        }
        self.points -= 1;
        self.refcounts[id.index()] -= 1;
        if self.refcounts[id.index()] == 0 {
            let label = self.labels[id.index()].take().expect("live id has a label");
            self.index.remove(&label);
            self.free.push(id);
        }
        if self.capacity() > 2 * self.points {
            return Ok(Some(self.renumber()));
        }
        Ok(None)
    }

    fn renumber(&mut self) -> Remap {
        let mut table = vec![0u32; self.labels.len()];
        let mut labels = vec![None];
        let mut refcounts = vec![0];
        for (next, (label, id)) in self.index.iter_mut().enumerate() {
            let new = next as u32 + 1;
            table[id.index()] = new;
            refcounts.push(self.refcounts[id.index()]);
            labels.push(Some(label.clone()));
            *id = ColourId(new);
        }
        self.labels = labels;
        self.refcounts = refcounts;
        self.free.clear();
        self.scratch.shrink(self.capacity());
        self.remaps += 1;
        Remap { table }
    }

    /// Checks that labels and ids are exact inverses and the bound holds.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.capacity() > 2 * self.points {
            return Err(format!(
                "capacity {} exceeds twice the point count {}",
                self.capacity(),
                self.points
            ));
        }
        let mut total = 0usize;
        for (label, id) in &self.index {
            if self.labels.get(id.index()).and_then(Option::as_ref) != Some(label) {
                return Err(format!("label/id mismatch at id {}", id.0));
            }
            if self.refcounts[id.index()] == 0 {
                return Err(format!("live id {} has zero refcount", id.0));
            }
            total += self.refcounts[id.index()] as usize;
        }
        if total != self.points {
            return Err(format!("refcounts sum to {total}, expected {}", self.points));
        }
        if self.scratch.capacity() < self.capacity() {
            return Err("scratch array smaller than id space".into());
        }
        Ok(())
    }
}
