//! K²-tree: a binary occupancy matrix stored as two bit sequences.
//!
//! The matrix (padded to side `k^h`) is split into `k²` equal submatrices,
//! ordered row-major. A node bit is 1 when its submatrix holds at least one
//! occupied cell, and only 1-bits are subdivided further. `T` holds every
//! level but the last in level order, `L` holds the last level (the cells).
//! The children of the 1-bit at position `p` of `T` start at
//! `rank1(T, p) * k²` in the concatenation `T·L`.

use crate::error::{Error, Result};
use crate::succinct::BitSequence;
use crate::wire::{Reader, Writer};
use crate::{Cell, Rect};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct K2Tree {
    k: u32,
    height: u32,
    /// Logical side; cells at or beyond it are out of bounds.
    size: u64,
    t: BitSequence,
    l: BitSequence,
}

fn checked_side(k: u32, height: u32) -> Option<u64> {
    (k as u64).checked_pow(height)
}

impl K2Tree {
    /// Builds the tree for the occupied `points` of a `side_hint x side_hint`
    /// matrix. Duplicate points are allowed.
    pub fn build(points: &[Cell], side_hint: u64, k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::validation(format!(
                "K2-tree arity must be >= 2, got {k}"
            )));
        }
        let size = side_hint.max(1);
        if let Some(p) = points
            .iter()
            .find(|p| p.row as u64 >= size || p.col as u64 >= size)
        {
            return Err(Error::validation(format!(
                "cell ({}, {}) outside a {size}x{size} matrix",
                p.row, p.col
            )));
        }
        let mut height = 1;
        while checked_side(k, height).ok_or_else(|| Error::validation("matrix too large"))? < size {
            height += 1;
        }
        let kk = (k * k) as usize;
        let mut t_bits = Vec::new();
        let mut l_bits = Vec::new();

        let mut pts: Vec<Cell> = points.to_vec();
        pts.sort_unstable();
        pts.dedup();
        // (origin row, origin col, cells inside)
        let mut level: Vec<(u64, u64, Vec<Cell>)> = vec![(0, 0, pts)];
        for depth in 0..height {
            let child_side = checked_side(k, height - depth - 1).unwrap();
            let last = depth + 1 == height;
            let mut next = Vec::new();
            for (r0, c0, cells) in level {
                let mut buckets: Vec<Vec<Cell>> = vec![Vec::new(); kk];
                for c in cells {
                    let i = (c.row as u64 - r0) / child_side;
                    let j = (c.col as u64 - c0) / child_side;
                    buckets[(i * k as u64 + j) as usize].push(c);
                }
                for (child, bucket) in buckets.into_iter().enumerate() {
                    let occupied = !bucket.is_empty();
                    if last {
                        l_bits.push(occupied);
                    } else {
                        t_bits.push(occupied);
                        if occupied {
                            let i = (child / k as usize) as u64;
                            let j = (child % k as usize) as u64;
                            next.push((r0 + i * child_side, c0 + j * child_side, bucket));
                        }
                    }
                }
            }
            level = next;
        }
        Ok(Self {
            k,
            height,
            size,
            t: BitSequence::from_bits(t_bits),
            l: BitSequence::from_bits(l_bits),
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Padded side `k^height`.
    pub fn side(&self) -> u64 {
        checked_side(self.k, self.height).unwrap()
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn t(&self) -> &BitSequence {
        &self.t
    }

    pub fn l(&self) -> &BitSequence {
        &self.l
    }

    /// Number of occupied cells.
    pub fn occupied(&self) -> usize {
        self.l.count_ones()
    }

    #[inline]
    fn bit(&self, pos: usize) -> bool {
        if pos < self.t.len() {
            self.t.get(pos)
        } else {
            self.l.get(pos - self.t.len())
        }
    }

    #[inline]
    fn children_of(&self, pos: usize) -> usize {
        self.t.ones_before(pos + 1) * (self.k * self.k) as usize
    }

    fn check_cell(&self, row: u32, col: u32) -> Result<()> {
        if row as u64 >= self.size || col as u64 >= self.size {
            return Err(Error::OutOfRange {
                pos: row.max(col) as u64,
                len: self.size,
            });
        }
        Ok(())
    }

    /// Leaf position in `L` of the cell when it is occupied.
    pub fn contains(&self, row: u32, col: u32) -> Result<Option<usize>> {
        Ok(self.descend(row, col)?.1)
    }

    /// Top-down resolution, also returning the visited positions of `T`.
    pub fn descend(&self, row: u32, col: u32) -> Result<(Vec<usize>, Option<usize>)> {
        self.check_cell(row, col)?;
        let k = self.k as u64;
        let mut path = Vec::with_capacity(self.height as usize);
        let mut base = 0usize;
        for depth in 0..self.height {
            let child_side = checked_side(self.k, self.height - depth - 1).unwrap();
            let i = (row as u64 / child_side) % k;
            let j = (col as u64 / child_side) % k;
            let pos = base + (i * k + j) as usize;
            if !self.bit(pos) {
                return Ok((path, None));
            }
            if depth + 1 == self.height {
                return Ok((path, Some(pos - self.t.len())));
            }
            path.push(pos);
            base = self.children_of(pos);
        }
        unreachable!("height is at least 1")
    }

    /// Occupied cells inside `rect`, with their leaf positions, in level
    /// order (which is increasing leaf order).
    pub fn region_report(&self, rect: Rect) -> Vec<(Cell, usize)> {
        let mut out = Vec::new();
        let Some(rect) = rect.clip(
            self.size.min(u32::MAX as u64) as u32,
            self.size.min(u32::MAX as u64) as u32,
        ) else {
            return out;
        };
        let k = self.k as u64;
        let (rr1, rc1, rr2, rc2) = (
            rect.r1 as u64,
            rect.c1 as u64,
            rect.r2 as u64,
            rect.c2 as u64,
        );
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((0usize, 0u64, 0u64, 0u32));
        while let Some((base, r0, c0, depth)) = queue.pop_front() {
            let child_side = checked_side(self.k, self.height - depth - 1).unwrap();
            let last = depth + 1 == self.height;
            for i in 0..k {
                let top = r0 + i * child_side;
                if top > rr2 || top + child_side - 1 < rr1 {
                    continue;
                }
                for j in 0..k {
                    let left = c0 + j * child_side;
                    if left > rc2 || left + child_side - 1 < rc1 {
                        continue;
                    }
                    let pos = base + (i * k + j) as usize;
                    if !self.bit(pos) {
                        continue;
                    }
                    if last {
                        out.push((Cell::new(top as u32, left as u32), pos - self.t.len()));
                    } else {
                        queue.push_back((self.children_of(pos), top, left, depth + 1));
                    }
                }
            }
        }
        out
    }

    /// Bottom-up resolution of an occupied leaf to its cell.
    pub fn cell_of_leaf(&self, leaf: usize) -> Result<Cell> {
        if leaf >= self.l.len() || !self.l.get(leaf) {
            return Err(Error::InvalidLeaf(leaf));
        }
        let kk = (self.k * self.k) as usize;
        let mut pos = self.t.len() + leaf;
        let (mut row, mut col) = (0u64, 0u64);
        let mut scale = 1u64;
        for _ in 0..self.height {
            let off = pos % kk;
            row += (off / self.k as usize) as u64 * scale;
            col += (off % self.k as usize) as u64 * scale;
            scale *= self.k as u64;
            let block = pos / kk;
            if block == 0 {
                break;
            }
            pos = self
                .t
                .select1(block)
                .ok_or_else(|| Error::corrupt("K2-tree block without a parent"))?;
        }
        Ok(Cell::new(row as u32, col as u32))
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u32(self.k);
        w.u32(self.height);
        w.u64(self.size);
        self.t.write(w);
        self.l.write(w);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let k = r.u32()?;
        let height = r.u32()?;
        let size = r.u64()?;
        let t = BitSequence::read(r)?;
        let l = BitSequence::read(r)?;
        let kk = (k as usize).saturating_mul(k as usize);
        if k < 2 || height == 0 || checked_side(k, height).is_none_or(|s| s < size) {
            return Err(Error::corrupt("bad K2-tree header"));
        }
        let expected = kk * (1 + t.count_ones());
        if t.len() + l.len() != expected || (height == 1 && !t.is_empty()) {
            return Err(Error::corrupt("K2-tree bit counts inconsistent"));
        }
        Ok(Self {
            k,
            height,
            size,
            t,
            l,
        })
    }

    pub fn serialized_len(&self) -> usize {
        16 + self.t.serialized_len() + self.l.serialized_len()
    }
}
