//! Full placement of the objects at one instant.
//!
//! Occupied cells live in a [`K2Tree`]. The identifiers of the objects in
//! each occupied cell are listed in `perm`, grouped by leaf in `L` order, and
//! the aligned bitmap `Q` closes every group with a 0. `perm` is stored as a
//! [`ShortcutPermutation`] over *local* ids (the rank of the object among the
//! objects present at this instant), so that the position of an object in
//! `perm` is one permutation inverse away.

use crate::error::{Error, Result};
use crate::k2tree::K2Tree;
use crate::spiral::Displacement;
use crate::succinct::{BitSequence, ShortcutPermutation};
use crate::wire::{Reader, Writer};
use crate::{Cell, Rect};

/// Return of an object that went missing inside the same segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelReappearance {
    pub oid: u32,
    /// Instants between the disappearance and the reappearance.
    pub elapsed: u32,
    /// Offset from the last known cell.
    pub delta: Displacement,
}

/// Return of an object whose last known position precedes the snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbsReappearance {
    pub oid: u32,
    pub instant: u32,
    pub cell: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    tree: K2Tree,
    /// One bit per object id: placed in this snapshot or not.
    present: BitSequence,
    perm: ShortcutPermutation,
    q: BitSequence,
    rel: Vec<RelReappearance>,
    /// Sorted by object id, at most one per object.
    abs: Vec<AbsReappearance>,
}

impl Snapshot {
    /// Builds a snapshot for objects `0..num_objects`. Objects sharing a cell
    /// keep their relative order from `placements`.
    pub fn build(
        placements: &[(u32, Cell)],
        num_objects: usize,
        side: u64,
        k: u32,
    ) -> Result<Self> {
        let mut present = vec![false; num_objects];
        for &(oid, _) in placements {
            let slot = present
                .get_mut(oid as usize)
                .ok_or_else(|| Error::validation(format!("object {oid} >= {num_objects}")))?;
            if std::mem::replace(slot, true) {
                return Err(Error::validation(format!("object {oid} placed twice")));
            }
        }
        let cells: Vec<Cell> = placements.iter().map(|p| p.1).collect();
        let tree = K2Tree::build(&cells, side, k)?;
        let present = BitSequence::from_bits(present);

        let mut order: Vec<(usize, usize)> = placements
            .iter()
            .enumerate()
            .map(|(i, &(_, c))| {
                let leaf = tree
                    .contains(c.row, c.col)?
                    .expect("built cell must be occupied");
                Ok((leaf, i))
            })
            .collect::<Result<_>>()?;
        order.sort_unstable();

        let locals: Vec<u64> = order
            .iter()
            .map(|&(_, i)| present.ones_before(placements[i].0 as usize) as u64)
            .collect();
        let q = BitSequence::from_bits(
            order
                .iter()
                .enumerate()
                .map(|(j, &(leaf, _))| order.get(j + 1).is_some_and(|n| n.0 == leaf)),
        );
        Ok(Self {
            tree,
            present,
            perm: ShortcutPermutation::new(&locals)?,
            q,
            rel: Vec::new(),
            abs: Vec::new(),
        })
    }

    pub fn set_reappearances(
        &mut self,
        rel: Vec<RelReappearance>,
        mut abs: Vec<AbsReappearance>,
    ) -> Result<()> {
        abs.sort_by_key(|a| a.oid);
        if abs.windows(2).any(|w| w[0].oid == w[1].oid) {
            return Err(Error::validation(
                "more than one absolute reappearance for an object",
            ));
        }
        self.rel = rel;
        self.abs = abs;
        Ok(())
    }

    pub fn tree(&self) -> &K2Tree {
        &self.tree
    }

    pub fn q(&self) -> &BitSequence {
        &self.q
    }

    pub fn permutation(&self) -> &ShortcutPermutation {
        &self.perm
    }

    pub fn rel_reappearances(&self) -> &[RelReappearance] {
        &self.rel
    }

    pub fn abs_reappearances(&self) -> &[AbsReappearance] {
        &self.abs
    }

    pub fn abs_reappearance(&self, oid: u32) -> Option<&AbsReappearance> {
        self.abs
            .binary_search_by_key(&oid, |a| a.oid)
            .ok()
            .map(|i| &self.abs[i])
    }

    pub fn num_objects(&self) -> usize {
        self.present.len()
    }

    /// Number of objects placed at this instant.
    pub fn placed(&self) -> usize {
        self.q.len()
    }

    pub fn is_placed(&self, oid: u32) -> bool {
        (oid as usize) < self.present.len() && self.present.get(oid as usize)
    }

    /// Identifiers in `perm` order.
    pub fn perm(&self) -> Vec<u32> {
        (0..self.placed()).map(|i| self.object_at(i)).collect()
    }

    /// Object identifier at position `i` of `perm`.
    #[inline]
    fn object_at(&self, i: usize) -> u32 {
        let local = self.perm.apply(i).expect("perm position in range");
        self.present
            .select1(local + 1)
            .expect("local id maps to an object") as u32
    }

    /// Objects attached to the occupied leaf `leaf` of `L`.
    fn objects_of_leaf(&self, leaf: usize, out: &mut Vec<u32>) {
        let x = self.tree.l().ones_before(leaf + 1);
        let mut p = (self
            .q
            .select(false, x - 1)
            .expect("Q has a terminator per leaf")
            + 1) as usize;
        loop {
            out.push(self.object_at(p));
            if !self.q.get(p) {
                break;
            }
            p += 1;
        }
    }

    pub fn objects_in_cell(&self, row: u32, col: u32) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        if let Some(leaf) = self.tree.contains(row, col)? {
            self.objects_of_leaf(leaf, &mut out);
        }
        Ok(out)
    }

    pub fn cell_of_object(&self, oid: u32) -> Result<Cell> {
        if !self.is_placed(oid) {
            return Err(Error::not_found(format!("object {oid} in snapshot")));
        }
        let local = self.present.ones_before(oid as usize);
        let k = self.perm.inverse(local)?;
        let y = self.q.zeros_before(k);
        let leaf = self
            .tree
            .l()
            .select1(y + 1)
            .ok_or_else(|| Error::corrupt("Q terminators exceed occupied leaves"))?;
        self.tree.cell_of_leaf(leaf)
    }

    /// Placed objects inside `rect`, in leaf order.
    pub fn objects_in_region(&self, rect: Rect) -> Vec<(u32, Cell)> {
        let mut out = Vec::new();
        let mut ids = Vec::new();
        for (cell, leaf) in self.tree.region_report(rect) {
            ids.clear();
            self.objects_of_leaf(leaf, &mut ids);
            out.extend(ids.iter().map(|&o| (o, cell)));
        }
        out
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        self.tree.write(w);
        self.present.write(w);
        self.perm.write(w);
        self.q.write(w);
        w.u64(self.rel.len() as u64);
        for r in &self.rel {
            w.u32(r.oid);
            w.u32(r.elapsed);
            w.i32(r.delta.dx as i32);
            w.i32(r.delta.dy as i32);
        }
        w.u64(self.abs.len() as u64);
        for a in &self.abs {
            w.u32(a.oid);
            w.u32(a.instant);
            w.u32(a.cell.row);
            w.u32(a.cell.col);
        }
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let tree = K2Tree::read(r)?;
        let present = BitSequence::read(r)?;
        let perm = ShortcutPermutation::read(r)?;
        let q = BitSequence::read(r)?;
        if perm.len() != q.len()
            || perm.len() != present.count_ones()
            || q.count_zeros() != tree.occupied()
        {
            return Err(Error::corrupt("snapshot arrays disagree"));
        }
        let n = r.len_u64()?;
        let mut rel = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            rel.push(RelReappearance {
                oid: r.u32()?,
                elapsed: r.u32()?,
                delta: Displacement::new(r.i32()? as i64, r.i32()? as i64),
            });
        }
        let n = r.len_u64()?;
        let mut abs = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            abs.push(AbsReappearance {
                oid: r.u32()?,
                instant: r.u32()?,
                cell: Cell::new(r.u32()?, r.u32()?),
            });
        }
        let mut snap = Self {
            tree,
            present,
            perm,
            q,
            rel: Vec::new(),
            abs: Vec::new(),
        };
        snap.set_reappearances(rel, abs)
            .map_err(|e| Error::corrupt(e.to_string()))?;
        Ok(snap)
    }

    /// Bytes of the K²-tree alone.
    pub fn tree_bytes(&self) -> usize {
        self.tree.serialized_len()
    }

    /// Bytes of `perm`, `Q` and the presence bitmap.
    pub fn attachment_bytes(&self) -> usize {
        self.present.serialized_len() + self.perm.serialized_len() + self.q.serialized_len()
    }

    pub fn reappearance_bytes(&self) -> usize {
        16 + 16 * (self.rel.len() + self.abs.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(b: &BitSequence) -> String {
        b.iter().map(|x| if x { '1' } else { '0' }).collect()
    }

    #[test]
    fn two_leaf_grouping() {
        // a 2x2 grid whose L is 0101
        let placements = [
            (10, Cell::new(0, 1)),
            (30, Cell::new(0, 1)),
            (25, Cell::new(1, 1)),
            (28, Cell::new(1, 1)),
            (29, Cell::new(1, 1)),
        ];
        let s = Snapshot::build(&placements, 31, 2, 2).unwrap();
        assert_eq!(bits(s.tree().l()), "0101");
        assert_eq!(s.perm(), vec![10, 30, 25, 28, 29]);
        assert_eq!(bits(s.q()), "10110");
        assert_eq!(s.objects_in_cell(1, 1).unwrap(), vec![25, 28, 29]);
        assert_eq!(s.objects_in_cell(0, 1).unwrap(), vec![10, 30]);
        assert!(s.objects_in_cell(0, 0).unwrap().is_empty());
        assert_eq!(s.cell_of_object(28).unwrap(), Cell::new(1, 1));
        assert_eq!(s.q().count_zeros(), s.tree().l().count_ones());
    }

    #[test]
    fn single_object() {
        let s = Snapshot::build(&[(0, Cell::new(3, 1))], 1, 4, 2).unwrap();
        assert_eq!(s.perm(), vec![0]);
        assert_eq!(bits(s.q()), "0");
        assert_eq!(s.cell_of_object(0).unwrap(), Cell::new(3, 1));
    }

    #[test]
    fn errors() {
        let dup = [(1, Cell::new(0, 0)), (1, Cell::new(1, 1))];
        assert!(matches!(
            Snapshot::build(&dup, 2, 4, 2),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Snapshot::build(&[(5, Cell::new(0, 0))], 2, 4, 2),
            Err(Error::Validation(_))
        ));
        let s = Snapshot::build(&[(1, Cell::new(0, 0))], 3, 4, 2).unwrap();
        assert!(matches!(s.cell_of_object(0), Err(Error::NotFound { .. })));
        assert!(matches!(s.cell_of_object(7), Err(Error::NotFound { .. })));
        let mut s = s;
        let a = AbsReappearance {
            oid: 0,
            instant: 3,
            cell: Cell::new(1, 1),
        };
        assert!(s.set_reappearances(vec![], vec![a, a]).is_err());
    }

    #[test]
    fn empty_snapshot() {
        let s = Snapshot::build(&[], 4, 16, 2).unwrap();
        assert_eq!(s.placed(), 0);
        assert!(s.objects_in_region(Rect::new(0, 0, 15, 15)).is_empty());
    }

    #[test]
    fn serialization_roundtrip() {
        let placements = [
            (2, Cell::new(5, 1)),
            (0, Cell::new(5, 1)),
            (3, Cell::new(0, 7)),
        ];
        let mut s = Snapshot::build(&placements, 5, 8, 2).unwrap();
        s.set_reappearances(
            vec![RelReappearance {
                oid: 2,
                elapsed: 4,
                delta: Displacement::new(-1, 3),
            }],
            vec![AbsReappearance {
                oid: 4,
                instant: 9,
                cell: Cell::new(2, 2),
            }],
        )
        .unwrap();
        let mut w = Writer::new();
        s.write(&mut w);
        let bytes = w.into_inner();
        assert_eq!(
            bytes.len(),
            s.tree_bytes() + s.attachment_bytes() + s.reappearance_bytes()
        );
        assert_eq!(Snapshot::read(&mut Reader::new(&bytes)).unwrap(), s);
    }
}
