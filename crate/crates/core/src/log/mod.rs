//! Relative-movement logs between consecutive snapshots.
//!
//! Every object gets its own stream of movement symbols for the instants
//! strictly between two snapshots. A symbol is either a spiral-coded move,
//! a disappearance, or a reappearance that points into the reappearance
//! tables of the left snapshot. Missing instants emit nothing; the
//! reappearance record restores the instant counter. Streams are
//! compressed with one global (s,c)-dense code.
//!
//! Two optional side tables speed up replays: the position of every object
//! at the last instant of the segment (backward replay), and periodic
//! accumulated displacements (replay from the nearest checkpoint).

mod replay;

pub use replay::{Cursor, SegmentView};

use crate::error::{Error, Result};
use crate::ingest::NormalizedDataset;
use crate::scdc::{FrequencyModel, ScdcParams};
use crate::snapshot::{AbsReappearance, RelReappearance};
use crate::spiral::{self, Displacement};
use crate::wire::{Reader, Writer};
use crate::Cell;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MovementSymbol {
    /// Spiral code of the displacement since the previous instant.
    Move(u64),
    Disappear,
    /// Index into the left snapshot's relative reappearances.
    RelReappear(u32),
    /// The object's entry in the left snapshot's absolute reappearances.
    AbsReappear,
}

/// Mapping of movement symbols onto one integer alphabet: spiral codes
/// `0..=S`, then `S+1` for disappearances, `S+2` for absolute and `S+3+i`
/// for the `i`-th relative reappearance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymbolSpace {
    max_step: u32,
    max_code: u64,
}

impl SymbolSpace {
    pub fn new(max_step: u32) -> Self {
        Self {
            max_step,
            max_code: spiral::max_code_for_radius(max_step as u64),
        }
    }

    pub fn max_step(&self) -> u32 {
        self.max_step
    }

    pub fn max_spiral_code(&self) -> u64 {
        self.max_code
    }

    pub fn to_symbol(&self, m: MovementSymbol) -> u64 {
        match m {
            MovementSymbol::Move(c) => c,
            MovementSymbol::Disappear => self.max_code + 1,
            MovementSymbol::AbsReappear => self.max_code + 2,
            MovementSymbol::RelReappear(i) => self.max_code + 3 + i as u64,
        }
    }

    pub fn classify(&self, sym: u64) -> Result<MovementSymbol> {
        let s = self.max_code;
        Ok(match sym {
            c if c <= s => MovementSymbol::Move(c),
            c if c == s + 1 => MovementSymbol::Disappear,
            c if c == s + 2 => MovementSymbol::AbsReappear,
            c => MovementSymbol::RelReappear(
                u32::try_from(c - s - 3)
                    .map_err(|_| Error::corrupt("reappearance index overflow"))?,
            ),
        })
    }
}

/// Model, code parameters and alphabet shared by every segment of an index.
#[derive(Clone, Debug)]
pub struct LogCodec {
    pub model: FrequencyModel,
    pub params: ScdcParams,
    pub space: SymbolSpace,
}

impl LogCodec {
    pub fn encode(&self, m: MovementSymbol, out: &mut Vec<u8>) -> Result<()> {
        let sym = self.space.to_symbol(m);
        let rank = self.model.rank_of(sym).ok_or(Error::UnknownSymbol(sym))?;
        self.params.encode_rank(rank, out);
        Ok(())
    }

    pub fn decode(&self, bytes: &[u8], offset: usize) -> Result<(MovementSymbol, usize)> {
        let (sym, next) = self.model.decode_symbol(bytes, offset, self.params)?;
        Ok((self.space.classify(sym)?, next))
    }
}

/// State of an object at the last instant of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailEntry {
    /// Not visible at any instant of the segment.
    Never,
    Present(Cell),
    /// Missing at the end; last seen at `last_seen`.
    Absent {
        last_seen: u32,
        cell: Cell,
    },
}

/// Object state at an accumulator checkpoint, relative to the object's
/// origin in the segment (its snapshot cell, or its absolute reappearance).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointState {
    Unseen,
    Present(Displacement),
    Absent {
        last: Displacement,
        disappeared_at: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    /// Byte offset in the object's stream where replay resumes.
    pub offset: u32,
    pub state: CheckpointState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Accumulators {
    interval: u32,
    count: usize,
    /// `[checkpoint * objects + oid]`
    entries: Vec<Checkpoint>,
}

impl Accumulators {
    pub fn interval(&self) -> u32 {
        self.interval
    }

    /// Checkpoints per object.
    pub fn count(&self) -> usize {
        self.count
    }
}

/// Symbol streams and side tables of one segment before compression.
#[derive(Clone, Debug)]
pub struct SegmentPlan {
    pub start: u32,
    pub end: u32,
    pub streams: Vec<Vec<MovementSymbol>>,
    pub rel: Vec<RelReappearance>,
    pub abs: Vec<AbsReappearance>,
    pub tails: Vec<TailEntry>,
    accumulator_interval: Option<u32>,
    /// `[checkpoint][oid]`: symbol index and state.
    checkpoints: Vec<Vec<(usize, CheckpointState)>>,
}

impl SegmentPlan {
    pub fn symbols<'a>(&'a self, space: &'a SymbolSpace) -> impl Iterator<Item = u64> + 'a {
        self.streams.iter().flatten().map(|&m| space.to_symbol(m))
    }
}

/// Derives the movement symbols of every object for the instants in
/// `(start, end)`, given that `start` is a snapshot instant.
#[allow(clippy::needless_range_loop)]
pub fn plan_segment(
    data: &NormalizedDataset,
    start: usize,
    end: usize,
    space: SymbolSpace,
    accumulator_interval: Option<u32>,
) -> Result<SegmentPlan> {
    if start >= end || end > data.instants() {
        return Err(Error::validation(format!(
            "segment [{start}, {end}) outside 0..{}",
            data.instants()
        )));
    }
    if accumulator_interval == Some(0) {
        return Err(Error::validation("accumulator interval must be positive"));
    }
    let m = data.num_objects();
    let max_step = space.max_step() as u64;
    let mut streams = Vec::with_capacity(m);
    let mut rel = Vec::new();
    let mut abs = Vec::new();
    let mut tails = Vec::with_capacity(m);
    let n_checkpoints = accumulator_interval.map_or(0, |d| (end - start - 1) / d as usize);
    let mut checkpoints = vec![Vec::with_capacity(m); n_checkpoints];

    for oid in 0..m as u32 {
        let traj = data.trajectory(oid);
        let mut syms = Vec::new();
        let origin_snapshot = traj[start];
        let mut origin = origin_snapshot;
        let mut current = origin_snapshot;
        let mut last: Option<(usize, Cell)> = origin_snapshot.map(|c| (start, c));
        let mut disappeared_at = 0usize;
        for t in start + 1..end {
            match (current, traj[t]) {
                (Some(prev), Some(c)) => {
                    let d = prev.displacement_to(c);
                    if d.ring() > max_step {
                        return Err(Error::validation(format!(
                            "object {oid} moves {} cells at instant {t}, above max step {max_step}",
                            d.ring()
                        )));
                    }
                    syms.push(MovementSymbol::Move(spiral::encode(d)));
                }
                (Some(_), None) => {
                    syms.push(MovementSymbol::Disappear);
                    disappeared_at = t;
                }
                (None, None) => {}
                (None, Some(c)) => match last {
                    Some((lt, lc)) => {
                        let delta = lc.displacement_to(c);
                        if delta.ring() > max_step * (t - lt) as u64 {
                            return Err(Error::validation(format!(
                                "object {oid} reappears {} cells away after {} instants",
                                delta.ring(),
                                t - lt
                            )));
                        }
                        syms.push(MovementSymbol::RelReappear(rel.len() as u32));
                        rel.push(RelReappearance {
                            oid,
                            elapsed: (t - disappeared_at) as u32,
                            delta,
                        });
                    }
                    None => {
                        syms.push(MovementSymbol::AbsReappear);
                        abs.push(AbsReappearance {
                            oid,
                            instant: t as u32,
                            cell: c,
                        });
                        origin = Some(c);
                    }
                },
            }
            current = traj[t];
            if let Some(c) = current {
                last = Some((t, c));
            }
            if let Some(d) = accumulator_interval {
                let off = t - start;
                if off.is_multiple_of(d as usize) {
                    let state = match (current, last, origin) {
                        (Some(c), _, Some(o)) => CheckpointState::Present(o.displacement_to(c)),
                        (None, Some((_, lc)), Some(o)) => CheckpointState::Absent {
                            last: o.displacement_to(lc),
                            disappeared_at: disappeared_at as u32,
                        },
                        _ => CheckpointState::Unseen,
                    };
                    checkpoints[off / d as usize - 1].push((syms.len(), state));
                }
            }
        }
        tails.push(match (current, last) {
            (Some(c), _) => TailEntry::Present(c),
            (None, Some((lt, lc))) => TailEntry::Absent {
                last_seen: lt as u32,
                cell: lc,
            },
            (None, None) => TailEntry::Never,
        });
        streams.push(syms);
    }
    Ok(SegmentPlan {
        start: start as u32,
        end: end as u32,
        streams,
        rel,
        abs,
        tails,
        accumulator_interval,
        checkpoints,
    })
}

/// One compressed segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogSegment {
    start: u32,
    end: u32,
    /// Stream `oid` occupies `bytes[offsets[oid]..offsets[oid + 1]]`.
    offsets: Vec<u64>,
    bytes: Vec<u8>,
    tails: Option<Vec<TailEntry>>,
    accumulators: Option<Accumulators>,
}

impl LogSegment {
    pub fn encode(plan: &SegmentPlan, codec: &LogCodec, bidirectional: bool) -> Result<Self> {
        let m = plan.streams.len();
        let mut bytes = Vec::new();
        let mut offsets = Vec::with_capacity(m + 1);
        // byte offset of each symbol index, per object
        let mut symbol_offsets: Vec<Vec<u32>> = Vec::with_capacity(m);
        for stream in &plan.streams {
            let base = bytes.len();
            offsets.push(base as u64);
            let mut so = Vec::with_capacity(stream.len() + 1);
            for &s in stream {
                so.push((bytes.len() - base) as u32);
                codec.encode(s, &mut bytes)?;
            }
            so.push((bytes.len() - base) as u32);
            symbol_offsets.push(so);
        }
        offsets.push(bytes.len() as u64);
        let accumulators = plan.accumulator_interval.map(|interval| {
            let mut entries = Vec::with_capacity(plan.checkpoints.len() * m);
            for row in &plan.checkpoints {
                for (oid, &(sym_idx, state)) in row.iter().enumerate() {
                    entries.push(Checkpoint {
                        offset: symbol_offsets[oid][sym_idx],
                        state,
                    });
                }
            }
            Accumulators {
                interval,
                count: plan.checkpoints.len(),
                entries,
            }
        });
        Ok(Self {
            start: plan.start,
            end: plan.end,
            offsets,
            bytes,
            tails: bidirectional.then(|| plan.tails.clone()),
            accumulators,
        })
    }

    /// Instant of the left snapshot.
    pub fn start(&self) -> u32 {
        self.start
    }

    /// First instant after the segment (the right snapshot, if any).
    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn num_objects(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn stream(&self, oid: u32) -> &[u8] {
        let i = oid as usize;
        &self.bytes[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn tails(&self) -> Option<&[TailEntry]> {
        self.tails.as_deref()
    }

    pub fn accumulators(&self) -> Option<&Accumulators> {
        self.accumulators.as_ref()
    }

    /// Checkpoint `j` (1-based, at instant `start + j * interval`) of `oid`.
    pub fn checkpoint(&self, j: usize, oid: u32) -> Option<&Checkpoint> {
        let acc = self.accumulators.as_ref()?;
        if j == 0 || j > acc.count {
            return None;
        }
        acc.entries.get((j - 1) * self.num_objects() + oid as usize)
    }

    /// Decodes the whole stream of `oid`.
    pub fn symbols_of(&self, oid: u32, codec: &LogCodec) -> Result<Vec<MovementSymbol>> {
        let s = self.stream(oid);
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < s.len() {
            let (m, next) = codec.decode(s, pos)?;
            out.push(m);
            pos = next;
        }
        Ok(out)
    }

    pub fn stream_bytes(&self) -> usize {
        self.bytes.len()
    }

    pub fn offset_bytes(&self) -> usize {
        8 * self.offsets.len()
    }

    pub fn tail_bytes(&self) -> usize {
        self.tails.as_ref().map_or(0, |t| {
            t.iter()
                .map(|e| match e {
                    TailEntry::Never => 1,
                    TailEntry::Present(_) => 9,
                    TailEntry::Absent { .. } => 13,
                })
                .sum()
        })
    }

    pub fn accumulator_bytes(&self) -> usize {
        self.accumulators
            .as_ref()
            .map_or(0, |a| 4 + 8 + CHECKPOINT_BYTES * a.entries.len())
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u32(self.start);
        w.u32(self.end);
        w.u64(self.num_objects() as u64);
        for &o in &self.offsets {
            w.u64(o);
        }
        w.blob(&self.bytes);
        let flags = self.tails.is_some() as u8 | (self.accumulators.is_some() as u8) << 1;
        w.u8(flags);
        if let Some(tails) = &self.tails {
            for t in tails {
                match *t {
                    TailEntry::Never => w.u8(0),
                    TailEntry::Present(c) => {
                        w.u8(1);
                        w.u32(c.row);
                        w.u32(c.col);
                    }
                    TailEntry::Absent { last_seen, cell } => {
                        w.u8(2);
                        w.u32(last_seen);
                        w.u32(cell.row);
                        w.u32(cell.col);
                    }
                }
            }
        }
        if let Some(acc) = &self.accumulators {
            w.u32(acc.interval);
            w.u64(acc.count as u64);
            for e in &acc.entries {
                w.u32(e.offset);
                let (tag, d, inst) = match e.state {
                    CheckpointState::Unseen => (0, Displacement::ZERO, 0),
                    CheckpointState::Present(d) => (1, d, 0),
                    CheckpointState::Absent {
                        last,
                        disappeared_at,
                    } => (2, last, disappeared_at),
                };
                w.u8(tag);
                w.i32(d.dx as i32);
                w.i32(d.dy as i32);
                w.u32(inst);
            }
        }
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let start = r.u32()?;
        let end = r.u32()?;
        let m = r.len_u64()?;
        let mut offsets = Vec::with_capacity(m + 1);
        for _ in 0..=m {
            offsets.push(r.u64()?);
        }
        let bytes = r.blob()?.to_vec();
        if start >= end
            || offsets[0] != 0
            || offsets.windows(2).any(|w| w[0] > w[1])
            || offsets[m] != bytes.len() as u64
        {
            return Err(Error::corrupt("segment offset table"));
        }
        let flags = r.u8()?;
        if flags > 3 {
            return Err(Error::corrupt("segment flags"));
        }
        let tails = if flags & 1 != 0 {
            let mut t = Vec::with_capacity(m);
            for _ in 0..m {
                t.push(match r.u8()? {
                    0 => TailEntry::Never,
                    1 => TailEntry::Present(Cell::new(r.u32()?, r.u32()?)),
                    2 => TailEntry::Absent {
                        last_seen: r.u32()?,
                        cell: Cell::new(r.u32()?, r.u32()?),
                    },
                    x => return Err(Error::corrupt(format!("tail tag {x}"))),
                });
            }
            Some(t)
        } else {
            None
        };
        let accumulators = if flags & 2 != 0 {
            let interval = r.u32()?;
            let count = r.len_u64()?;
            if interval == 0 {
                return Err(Error::corrupt("accumulator interval"));
            }
            let mut entries = Vec::with_capacity((count * m).min(1 << 24));
            for _ in 0..count * m {
                let offset = r.u32()?;
                let tag = r.u8()?;
                let d = Displacement::new(r.i32()? as i64, r.i32()? as i64);
                let inst = r.u32()?;
                let state = match tag {
                    0 => CheckpointState::Unseen,
                    1 => CheckpointState::Present(d),
                    2 => CheckpointState::Absent {
                        last: d,
                        disappeared_at: inst,
                    },
                    x => return Err(Error::corrupt(format!("checkpoint tag {x}"))),
                };
                entries.push(Checkpoint { offset, state });
            }
            Some(Accumulators {
                interval,
                count,
                entries,
            })
        } else {
            None
        };
        Ok(Self {
            start,
            end,
            offsets,
            bytes,
            tails,
            accumulators,
        })
    }

    pub fn serialized_len(&self) -> usize {
        4 + 4
            + 8
            + self.offset_bytes()
            + 8
            + self.bytes.len()
            + 1
            + self.tail_bytes()
            + self.accumulator_bytes()
    }
}

const CHECKPOINT_BYTES: usize = 4 + 1 + 4 + 4 + 4;
