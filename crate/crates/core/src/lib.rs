//! Dynamic range α-majority queries over coloured points.
//!
//! A point is a coordinate with a colour. Given a range, an α-majority is a
//! colour owning more than an α fraction of the points in that range. The
//! indexes here support insertions and deletions alongside those queries:
//!
//! * [`MajorityIndex`] for one-dimensional coordinates,
//! * [`MajorityIndex2D`] for points in the plane and axis-aligned rectangles,
//! * [`MajorityArray`] for a dynamic array queried by index intervals.
//!
//! ```
//! use range_majority::{MajorityIndex, Rational};
//!
//! let mut index = MajorityIndex::with_alpha(Rational::new(1, 3))?;
//! for (t, service) in [(10, "web"), (20, "dns"), (30, "web"), (40, "ssh"), (50, "web")] {
//!     index.insert(t, service)?;
//! }
//! assert_eq!(index.query(&10, &50)?, vec!["web"]);
//! index.delete(&30)?;
//! let answer = index.query_counts(&10, &40)?;
//! assert_eq!(answer.m, 3);
//! assert!(answer.colours.is_empty());
//! # Ok::<(), range_majority::Error>(())
//! ```

pub mod colours;
pub mod coord;
pub mod counted;
pub mod dynarray;
pub mod error;
pub mod harness;
pub mod index;
pub mod multidim;
pub mod navigation;
pub mod oracle;
pub mod params;
pub mod snapshot;
pub mod tree;

pub use colours::{ColourId, ColourRegistry, Remap, ScratchCounters};
pub use coord::{Coordinate, Real};
pub use counted::CountedSet;
pub use dynarray::MajorityArray;
pub use error::{Error, Result};
pub use index::{MajorityIndex, QueryAnswer, QueryTrace, Reported};
pub use multidim::{Counter2D, MajorityIndex2D, RangeTree};
pub use navigation::FindTop;
pub use params::{AlphaConfig, Rational};
pub use tree::{Candidate, Canonical, CanonicalSet, LeafId, MajorityTree, NodeId, NodeInfo, NodeRef, TreeStats};
