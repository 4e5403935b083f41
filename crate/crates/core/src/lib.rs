//! Compressed in-memory index for moving-object trajectories.
//!
//! Positions of every object are stored at regular *snapshot* instants as a
//! K²-tree over the occupied grid cells, with the object identifiers attached
//! to the tree leaves. Between two snapshots, each object's movement is kept
//! as a stream of relative displacements: every displacement is folded into a
//! single integer by a clockwise spiral enumeration and the resulting symbols
//! are compressed with an (s,c)-dense code. Queries (object position,
//! trajectory, time slice, time interval) run directly on the compressed form.
//!
//! ```
//! use trajectory_index::{ingest, IndexParams, TrajectoryIndex, Rect};
//!
//! let data = ingest::generate_synthetic(&ingest::SyntheticParams {
//!     objects: 20,
//!     instants: 100,
//!     ..Default::default()
//! });
//! let idx = TrajectoryIndex::build(&data, &IndexParams { snapshot_period: 30, ..Default::default() })?;
//! let here = idx.object_position(3, 45)?;
//! let hits = idx.time_slice(Rect::new(0, 0, 63, 63), 45)?;
//! # let _ = (here, hits);
//! # Ok::<(), trajectory_index::Error>(())
//! ```

pub mod engine;
pub mod error;
pub mod ingest;
pub mod k2tree;
pub mod log;
pub mod scdc;
pub mod snapshot;
pub mod spiral;
pub mod succinct;
mod wire;

pub use error::{Error, Result};

pub use engine::{IndexParams, IntervalHit, QueryCost, SizeReport, TrajectoryIndex};
pub use ingest::NormalizedDataset;
pub use k2tree::K2Tree;
pub use spiral::Displacement;

/// A grid cell, `row` growing southward and `col` growing eastward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    /// Displacement from `self` to `to`.
    pub fn displacement_to(self, to: Cell) -> Displacement {
        Displacement {
            dx: to.col as i64 - self.col as i64,
            dy: self.row as i64 - to.row as i64,
        }
    }

    /// Applies a displacement; `None` if the result leaves the u32 range.
    pub fn offset(self, d: Displacement) -> Option<Cell> {
        let row = u32::try_from(self.row as i64 - d.dy).ok()?;
        let col = u32::try_from(self.col as i64 + d.dx).ok()?;
        Some(Cell { row, col })
    }

    pub fn chebyshev(self, other: Cell) -> u64 {
        self.row
            .abs_diff(other.row)
            .max(self.col.abs_diff(other.col)) as u64
    }
}

/// Inclusive rectangle of cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub r1: u32,
    pub c1: u32,
    pub r2: u32,
    pub c2: u32,
}

impl Rect {
    /// Corners are normalized so that `r1 <= r2` and `c1 <= c2`.
    pub fn new(r1: u32, c1: u32, r2: u32, c2: u32) -> Self {
        Self {
            r1: r1.min(r2),
            c1: c1.min(c2),
            r2: r1.max(r2),
            c2: c1.max(c2),
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.r1..=self.r2).contains(&c.row) && (self.c1..=self.c2).contains(&c.col)
    }

    /// Chebyshev distance from `c` to the nearest cell of the rectangle.
    pub fn distance(&self, c: Cell) -> u64 {
        let gap = |v: u32, lo: u32, hi: u32| {
            if v < lo {
                lo - v
            } else {
                v.saturating_sub(hi)
            }
        };
        gap(c.row, self.r1, self.r2).max(gap(c.col, self.c1, self.c2)) as u64
    }

    /// Grows the rectangle by `by` cells on every side, clipped to
    /// `rows x cols`.
    pub fn expand(&self, by: u64, rows: u32, cols: u32) -> Rect {
        let by = by.min(u32::MAX as u64) as u32;
        Rect {
            r1: self.r1.saturating_sub(by),
            c1: self.c1.saturating_sub(by),
            r2: self.r2.saturating_add(by).min(rows.saturating_sub(1)),
            c2: self.c2.saturating_add(by).min(cols.saturating_sub(1)),
        }
    }

    /// Intersection with the `rows x cols` grid; `None` if disjoint.
    pub fn clip(&self, rows: u32, cols: u32) -> Option<Rect> {
        if rows == 0 || cols == 0 || self.r1 >= rows || self.c1 >= cols {
            return None;
        }
        Some(Rect {
            r1: self.r1,
            c1: self.c1,
            r2: self.r2.min(rows - 1),
            c2: self.c2.min(cols - 1),
        })
    }
}
