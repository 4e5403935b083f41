use super::{CheckpointState, LogCodec, LogSegment, MovementSymbol, TailEntry};
use crate::error::{Error, Result};
use crate::snapshot::Snapshot;
use crate::spiral;
use crate::{Cell, Rect};

/// A segment together with its left snapshot and the shared codec.
#[derive(Clone, Copy, Debug)]
pub struct SegmentView<'a> {
    pub codec: &'a LogCodec,
    pub segment: &'a LogSegment,
    pub snapshot: &'a Snapshot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    Unknown,
    Never,
    At(u32, Cell),
}

/// Forward replay of one object's stream.
#[derive(Clone, Debug)]
pub struct Cursor<'a> {
    view: SegmentView<'a>,
    oid: u32,
    stream: &'a [u8],
    pos: usize,
    instant: u32,
    cell: Option<Cell>,
    last: Option<Cell>,
    disappeared_at: u32,
    pending: Pending,
    decoded: u64,
}

impl<'a> Cursor<'a> {
    pub fn oid(&self) -> u32 {
        self.oid
    }

    pub fn instant(&self) -> u32 {
        self.instant
    }

    pub fn cell(&self) -> Option<Cell> {
        self.cell
    }

    /// Symbols decoded so far.
    pub fn decoded(&self) -> u64 {
        self.decoded
    }

    fn next_symbol(&mut self) -> Result<Option<MovementSymbol>> {
        if self.pos >= self.stream.len() {
            return Ok(None);
        }
        let (m, next) = self.view.codec.decode(self.stream, self.pos)?;
        self.pos = next;
        self.decoded += 1;
        Ok(Some(m))
    }

    /// Instant and cell where an absent object shows up again inside the
    /// segment, if it does. `None` while the object is visible.
    pub fn next_appearance(&mut self) -> Result<Option<(u32, Cell)>> {
        if self.cell.is_some() {
            return Ok(None);
        }
        if self.pending == Pending::Unknown {
            self.pending = match self.next_symbol()? {
                None => Pending::Never,
                Some(MovementSymbol::RelReappear(i)) => {
                    let rec = self
                        .view
                        .snapshot
                        .rel_reappearances()
                        .get(i as usize)
                        .filter(|r| r.oid == self.oid)
                        .ok_or_else(|| Error::corrupt(format!("relative reappearance {i}")))?;
                    let last = self.last.ok_or_else(|| {
                        Error::corrupt("relative reappearance of an unseen object")
                    })?;
                    let cell = last
                        .offset(rec.delta)
                        .ok_or_else(|| Error::corrupt("reappearance leaves the grid"))?;
                    Pending::At(self.disappeared_at + rec.elapsed, cell)
                }
                Some(MovementSymbol::AbsReappear) => {
                    let rec = self
                        .view
                        .snapshot
                        .abs_reappearance(self.oid)
                        .ok_or_else(|| {
                            Error::corrupt(format!("absolute reappearance of {}", self.oid))
                        })?;
                    Pending::At(rec.instant, rec.cell)
                }
                Some(m) => return Err(Error::corrupt(format!("{m:?} while object is missing"))),
            };
            if let Pending::At(at, _) = self.pending {
                if at <= self.instant || at >= self.view.segment.end() {
                    return Err(Error::corrupt(format!("reappearance at instant {at}")));
                }
            }
        }
        Ok(match self.pending {
            Pending::At(at, c) => Some((at, c)),
            _ => None,
        })
    }

    /// Moves to the next instant.
    pub fn advance(&mut self) -> Result<()> {
        let next = self.instant + 1;
        if next >= self.view.segment.end() {
            return Err(Error::OutOfRange {
                pos: next as u64,
                len: self.view.segment.end() as u64,
            });
        }
        match self.cell {
            Some(c) => match self.next_symbol()? {
                Some(MovementSymbol::Move(code)) => {
                    let cell = c
                        .offset(spiral::decode(code))
                        .ok_or_else(|| Error::corrupt("move leaves the grid"))?;
                    self.cell = Some(cell);
                    self.last = Some(cell);
                }
                Some(MovementSymbol::Disappear) => {
                    self.cell = None;
                    self.disappeared_at = next;
                    self.pending = Pending::Unknown;
                }
                Some(m) => return Err(Error::corrupt(format!("{m:?} while object is visible"))),
                None => return Err(Error::corrupt("stream ends while object is visible")),
            },
            None => {
                if let Some((at, c)) = self.next_appearance()? {
                    if at == next {
                        self.cell = Some(c);
                        self.last = Some(c);
                        self.pending = Pending::Unknown;
                    }
                }
            }
        }
        self.instant = next;
        Ok(())
    }

    /// Replays up to instant `t` and returns the cell there.
    pub fn advance_to(&mut self, t: u32) -> Result<Option<Cell>> {
        if t < self.instant || t >= self.view.segment.end() {
            return Err(Error::OutOfRange {
                pos: t as u64,
                len: self.view.segment.end() as u64,
            });
        }
        while self.instant < t {
            if self.cell.is_none() {
                match self.next_appearance()? {
                    Some((at, _)) if at <= t => self.instant = at - 1,
                    _ => {
                        self.instant = t;
                        break;
                    }
                }
            }
            self.advance()?;
        }
        Ok(self.cell)
    }
}

impl<'a> SegmentView<'a> {
    pub fn new(codec: &'a LogCodec, segment: &'a LogSegment, snapshot: &'a Snapshot) -> Self {
        Self {
            codec,
            segment,
            snapshot,
        }
    }

    fn check(&self, oid: u32, t: u32) -> Result<()> {
        if oid as usize >= self.segment.num_objects() {
            return Err(Error::not_found(format!("object {oid}")));
        }
        self.check_instant(t)
    }

    fn check_instant(&self, t: u32) -> Result<()> {
        if t < self.segment.start() || t >= self.segment.end() {
            return Err(Error::OutOfRange {
                pos: t as u64,
                len: self.segment.end() as u64,
            });
        }
        Ok(())
    }

    fn max_step(&self) -> u64 {
        self.codec.space.max_step() as u64
    }

    /// Cursor at the segment start; `start` is the snapshot cell of `oid`.
    pub fn cursor_from(&self, oid: u32, start: Option<Cell>) -> Cursor<'a> {
        Cursor {
            view: *self,
            oid,
            stream: self.segment.stream(oid),
            pos: 0,
            instant: self.segment.start(),
            cell: start,
            last: start,
            disappeared_at: 0,
            pending: Pending::Unknown,
            decoded: 0,
        }
    }

    pub fn cursor(&self, oid: u32) -> Result<Cursor<'a>> {
        self.check(oid, self.segment.start())?;
        let start = if self.snapshot.is_placed(oid) {
            Some(self.snapshot.cell_of_object(oid)?)
        } else {
            None
        };
        Ok(self.cursor_from(oid, start))
    }

    /// Position by forward replay from the left snapshot.
    pub fn position_at(&self, oid: u32, t: u32, cost: &mut u64) -> Result<Option<Cell>> {
        self.check(oid, t)?;
        let mut c = self.cursor(oid)?;
        let r = c.advance_to(t);
        *cost += c.decoded;
        r
    }

    /// Position by forward replay from the nearest accumulator checkpoint.
    pub fn position_at_accumulated(
        &self,
        oid: u32,
        t: u32,
        cost: &mut u64,
    ) -> Result<Option<Cell>> {
        self.check(oid, t)?;
        let acc = self
            .segment
            .accumulators()
            .ok_or(Error::Unsupported("segment has no accumulators"))?;
        let j = ((t - self.segment.start()) / acc.interval()) as usize;
        let Some(cp) = self.segment.checkpoint(j, oid).copied() else {
            return self.position_at(oid, t, cost);
        };
        let origin = || -> Result<Cell> {
            if self.snapshot.is_placed(oid) {
                self.snapshot.cell_of_object(oid)
            } else {
                self.snapshot
                    .abs_reappearance(oid)
                    .map(|r| r.cell)
                    .ok_or_else(|| Error::corrupt("checkpoint without an origin"))
            }
        };
        let shift = |o: Cell, d| {
            o.offset(d)
                .ok_or_else(|| Error::corrupt("checkpoint leaves the grid"))
        };
        let mut c = self.cursor_from(oid, None);
        c.instant = self.segment.start() + j as u32 * acc.interval();
        c.pos = cp.offset as usize;
        if c.pos > c.stream.len() {
            return Err(Error::corrupt("checkpoint offset"));
        }
        match cp.state {
            CheckpointState::Unseen => {}
            CheckpointState::Present(d) => {
                let cell = shift(origin()?, d)?;
                c.cell = Some(cell);
                c.last = Some(cell);
            }
            CheckpointState::Absent {
                last,
                disappeared_at,
            } => {
                c.last = Some(shift(origin()?, last)?);
                c.disappeared_at = disappeared_at;
            }
        }
        let r = c.advance_to(t);
        *cost += c.decoded;
        r
    }

    /// Position by backward replay from the tail of the segment.
    pub fn position_at_backward(&self, oid: u32, t: u32, cost: &mut u64) -> Result<Option<Cell>> {
        self.check(oid, t)?;
        self.walk_backward(oid, t, None, cost)
    }

    /// Backward replay to `t`. With `prune`, gives up as soon as the object
    /// cannot be inside that rectangle at `t`.
    fn walk_backward(
        &self,
        oid: u32,
        t: u32,
        prune: Option<Rect>,
        cost: &mut u64,
    ) -> Result<Option<Cell>> {
        let tails = self
            .segment
            .tails()
            .ok_or(Error::Unsupported("segment has no tail table"))?;
        let stream = self.segment.stream(oid);
        let params = self.codec.params;
        let mut pos = stream.len();
        let mut cur = self.segment.end() - 1;
        let back = |pos: usize, cost: &mut u64| -> Result<(MovementSymbol, usize)> {
            let prev = params
                .previous_boundary(stream, 0, pos)
                .ok_or_else(|| Error::corrupt("stream too short for backward replay"))?;
            *cost += 1;
            Ok((self.codec.decode(stream, prev)?.0, prev))
        };
        let mut cell = match tails[oid as usize] {
            TailEntry::Never => return Ok(None),
            TailEntry::Present(c) => c,
            TailEntry::Absent { last_seen, cell } => {
                if t > last_seen {
                    return Ok(None);
                }
                let (m, prev) = back(pos, cost)?;
                if m != MovementSymbol::Disappear {
                    return Err(Error::corrupt("absent tail without a disappearance"));
                }
                pos = prev;
                cur = last_seen;
                cell
            }
        };
        while cur > t {
            if let Some(r) = prune {
                if r.distance(cell) > self.max_step() * (cur - t) as u64 {
                    return Ok(None);
                }
            }
            let (m, prev) = back(pos, cost)?;
            pos = prev;
            match m {
                MovementSymbol::Move(code) => {
                    cell = cell
                        .offset(-spiral::decode(code))
                        .ok_or_else(|| Error::corrupt("move leaves the grid"))?;
                    cur -= 1;
                }
                MovementSymbol::RelReappear(i) => {
                    let rec = self
                        .snapshot
                        .rel_reappearances()
                        .get(i as usize)
                        .filter(|r| r.oid == oid)
                        .ok_or_else(|| Error::corrupt(format!("relative reappearance {i}")))?;
                    let gone = cur
                        .checked_sub(rec.elapsed)
                        .filter(|&g| g > self.segment.start())
                        .ok_or_else(|| Error::corrupt("reappearance before the segment"))?;
                    if t >= gone {
                        return Ok(None);
                    }
                    cell = cell
                        .offset(-rec.delta)
                        .ok_or_else(|| Error::corrupt("reappearance leaves the grid"))?;
                    cur = gone - 1;
                    let (m, prev) = back(pos, cost)?;
                    if m != MovementSymbol::Disappear {
                        return Err(Error::corrupt("reappearance without a disappearance"));
                    }
                    pos = prev;
                }
                MovementSymbol::AbsReappear => return Ok(None),
                MovementSymbol::Disappear => {
                    return Err(Error::corrupt("disappearance while object is visible"));
                }
            }
        }
        Ok(Some(cell).filter(|c| prune.is_none_or(|r| r.contains(*c))))
    }

    /// Tracks candidates from the left snapshot to `t`, dropping an object as
    /// soon as it can no longer reach `rect`. A candidate's start cell is its
    /// snapshot cell, or `None` if it is missing at the snapshot.
    pub fn follow_candidates(
        &self,
        candidates: &[(u32, Option<Cell>)],
        rect: Rect,
        t: u32,
        cost: &mut u64,
    ) -> Result<Vec<(u32, Cell)>> {
        let ms = self.max_step();
        let mut out = Vec::new();
        for &(oid, start) in candidates {
            self.check(oid, t)?;
            let mut c = self.cursor_from(oid, start);
            let hit = loop {
                if c.instant == t {
                    break c.cell.filter(|x| rect.contains(*x));
                }
                match c.cell {
                    Some(x) if rect.distance(x) > ms * (t - c.instant) as u64 => break None,
                    Some(_) => {}
                    None => match c.next_appearance()? {
                        Some((at, x)) if at <= t && rect.distance(x) <= ms * (t - at) as u64 => {}
                        _ => break None,
                    },
                }
                c.advance()?;
            };
            *cost += c.decoded;
            if let Some(x) = hit {
                out.push((oid, x));
            }
        }
        Ok(out)
    }

    /// Backward counterpart of [`follow_candidates`](Self::follow_candidates),
    /// starting from the tail table.
    pub fn follow_candidates_backward(
        &self,
        candidates: &[u32],
        rect: Rect,
        t: u32,
        cost: &mut u64,
    ) -> Result<Vec<(u32, Cell)>> {
        let mut out = Vec::new();
        for &oid in candidates {
            self.check(oid, t)?;
            if let Some(x) = self.walk_backward(oid, t, Some(rect), cost)? {
                out.push((oid, x));
            }
        }
        Ok(out)
    }

    /// First instant in `[a, b]` at which each candidate is inside `rect`.
    pub fn first_inside(
        &self,
        candidates: &[(u32, Option<Cell>)],
        rect: Rect,
        a: u32,
        b: u32,
        cost: &mut u64,
    ) -> Result<Vec<(u32, u32, Cell)>> {
        if a > b {
            return Ok(Vec::new());
        }
        let ms = self.max_step();
        let mut out = Vec::new();
        for &(oid, start) in candidates {
            self.check(oid, b)?;
            self.check(oid, a)?;
            let mut c = self.cursor_from(oid, start);
            let hit = loop {
                if c.instant >= a {
                    if let Some(x) = c.cell.filter(|x| rect.contains(*x)) {
                        break Some((c.instant, x));
                    }
                }
                if c.instant == b {
                    break None;
                }
                match c.cell {
                    Some(x) if rect.distance(x) > ms * (b - c.instant) as u64 => break None,
                    Some(_) => {}
                    None => match c.next_appearance()? {
                        Some((at, x)) if at <= b && rect.distance(x) <= ms * (b - at) as u64 => {}
                        _ => break None,
                    },
                }
                c.advance()?;
            };
            *cost += c.decoded;
            if let Some((i, x)) = hit {
                out.push((oid, i, x));
            }
        }
        Ok(out)
    }
}
