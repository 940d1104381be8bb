//! Coordinate types accepted by the indexes.

use std::fmt::Debug;
use std::hash::Hash;

use ordered_float::OrderedFloat;

use crate::counted::{CountedSet, COMPARISON_FANOUT, WORD_FANOUT};

/// Real-valued coordinate with a total order.
pub type Real = OrderedFloat<f64>;

/// A totally ordered, hashable coordinate.
pub trait Coordinate: Copy + Ord + Hash + Debug {
    /// Smallest representable value.
    const MIN: Self;
    /// Largest representable value.
    const MAX: Self;
    /// Word-sized integer keys take the integer fast path.
    const INTEGER: bool;
    /// Fanout of the counted sets holding this coordinate.
    const SET_FANOUT: usize;

    fn counted_set() -> CountedSet<Self> {
        CountedSet::with_fanout(Self::SET_FANOUT)
    }
}

macro_rules! word_coordinate {
    ($($t:ty),*) => {$(
        impl Coordinate for $t {
            const MIN: Self = <$t>::MIN;
            const MAX: Self = <$t>::MAX;
            const INTEGER: bool = true;
            const SET_FANOUT: usize = WORD_FANOUT;
        }
    )*};
}

word_coordinate!(i64, u64, i32, u32);

impl Coordinate for Real {
    const MIN: Self = OrderedFloat(f64::NEG_INFINITY);
    const MAX: Self = OrderedFloat(f64::INFINITY);
    const INTEGER: bool = false;
    const SET_FANOUT: usize = COMPARISON_FANOUT;
}

/// Lexicographic pairs; used for the secondary keys of the 2-D index.
impl<A: Coordinate, B: Coordinate> Coordinate for (A, B) {
    const MIN: Self = (A::MIN, B::MIN);
    const MAX: Self = (A::MAX, B::MAX);
    const INTEGER: bool = false;
    const SET_FANOUT: usize = COMPARISON_FANOUT;
}
