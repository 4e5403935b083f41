//! The trajectory index: snapshots every `P` instants, compressed logs in
//! between, and the queries built on top of them.

use crate::error::{Error, Result};
use crate::ingest::{read_ids, write_ids, NormalizedDataset};
use crate::log::{plan_segment, LogCodec, LogSegment, SegmentView, SymbolSpace, TailEntry};
use crate::scdc::{FrequencyModel, ScdcParams};
use crate::snapshot::Snapshot;
use crate::wire::{Reader, Writer};
use crate::{Cell, Rect};
use std::collections::HashSet;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CTIX";
const VERSION: u32 = 1;
/// Stopper count used when the logs hold no symbol at all.
const FALLBACK_STOPPERS: u32 = 128;

/// `(object, first instant inside, cell at that instant)`.
pub type IntervalHit = (u32, u32, Cell);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexParams {
    /// Instants between consecutive snapshots.
    pub snapshot_period: u32,
    /// K²-tree arity.
    pub k: u32,
    /// Largest per-instant move. Taken from the data when `None`; an explicit
    /// value must not be smaller than the data's.
    pub max_step: Option<u32>,
    /// Store the last position of every object in each segment so that
    /// queries near the right snapshot can replay backwards.
    pub bidirectional: bool,
    /// Store accumulated displacements every this many instants.
    pub accumulator_interval: Option<u32>,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            snapshot_period: 120,
            k: 2,
            max_step: None,
            bidirectional: false,
            accumulator_interval: None,
        }
    }
}

/// Work done by one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCost {
    /// Log symbols decoded.
    pub decoded_symbols: u64,
    /// Objects whose movements were tracked through a log.
    pub candidates: u64,
}

impl std::ops::AddAssign for QueryCost {
    fn add_assign(&mut self, o: QueryCost) {
        self.decoded_symbols += o.decoded_symbols;
        self.candidates += o.candidates;
    }
}

/// Serialized size of each part of the index, in bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SizeReport {
    pub header_bytes: usize,
    pub id_bytes: usize,
    pub model_bytes: usize,
    pub offset_table_bytes: usize,
    pub snapshot_tree_bytes: usize,
    /// `perm`, `Q` and the presence bitmaps.
    pub snapshot_attachment_bytes: usize,
    pub reappearance_bytes: usize,
    pub log_bytes: usize,
    pub log_offset_bytes: usize,
    pub tail_bytes: usize,
    pub accumulator_bytes: usize,
    /// Segment framing not covered by the fields above.
    pub segment_overhead_bytes: usize,
    pub total_bytes: usize,
    /// Eight bytes per visible (object, instant) pair.
    pub baseline_bytes: u64,
    /// `total_bytes` as a percentage of `baseline_bytes`; `None` for an
    /// empty baseline.
    pub ratio_percent: Option<f64>,
    pub snapshots: usize,
    pub stopper_count: u32,
    pub vocabulary: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryIndex {
    params: IndexParams,
    max_step: u32,
    rows: u32,
    cols: u32,
    instants: u32,
    cell_size: f64,
    bucket_seconds: f64,
    present_pairs: u64,
    ids: Vec<String>,
    codec: LogCodec,
    snapshots: Vec<Snapshot>,
    segments: Vec<LogSegment>,
}

impl PartialEq for LogCodec {
    fn eq(&self, o: &Self) -> bool {
        self.model.symbols() == o.model.symbols()
            && self.params == o.params
            && self.space == o.space
    }
}

impl TrajectoryIndex {
    pub fn build(data: &NormalizedDataset, params: &IndexParams) -> Result<Self> {
        let p = params.snapshot_period;
        if p == 0 {
            return Err(Error::validation("snapshot period must be at least 1"));
        }
        if params.k < 2 {
            return Err(Error::validation("k must be at least 2"));
        }
        if params.accumulator_interval == Some(0) {
            return Err(Error::validation("accumulator interval must be at least 1"));
        }
        if data.instants() == 0 || data.num_objects() == 0 {
            return Err(Error::validation("dataset has no instants or no objects"));
        }
        let instants =
            u32::try_from(data.instants()).map_err(|_| Error::validation("too many instants"))?;
        u32::try_from(data.num_objects()).map_err(|_| Error::validation("too many objects"))?;
        let observed = data.max_step();
        let max_step = match params.max_step {
            Some(s) if s < observed => {
                return Err(Error::validation(format!(
                    "max step {s} is below the observed {observed}"
                )))
            }
            Some(s) => s,
            None => observed,
        };
        let space = SymbolSpace::new(max_step);
        let n_segments = instants.div_ceil(p) as usize;
        let mut plans = Vec::with_capacity(n_segments);
        for i in 0..n_segments {
            let start = i * p as usize;
            let end = (start + p as usize).min(data.instants());
            plans.push(plan_segment(
                data,
                start,
                end,
                space,
                params.accumulator_interval,
            )?);
        }
        let model = FrequencyModel::from_symbols(plans.iter().flat_map(|pl| pl.symbols(&space)));
        let scdc = if model.is_empty() {
            ScdcParams::new(FALLBACK_STOPPERS)?
        } else {
            model.choose_optimal_s()?
        };
        let codec = LogCodec {
            model,
            params: scdc,
            space,
        };
        let side = data.rows().max(data.cols()).max(1) as u64;
        let mut snapshots = Vec::with_capacity(n_segments);
        let mut segments = Vec::with_capacity(n_segments);
        for plan in plans {
            let mut snap = Snapshot::build(
                &data.placements_at(plan.start as usize),
                data.num_objects(),
                side,
                params.k,
            )?;
            segments.push(LogSegment::encode(&plan, &codec, params.bidirectional)?);
            snap.set_reappearances(plan.rel, plan.abs)?;
            snapshots.push(snap);
        }
        Ok(Self {
            params: IndexParams {
                max_step: Some(max_step),
                ..*params
            },
            max_step,
            rows: data.rows(),
            cols: data.cols(),
            instants,
            cell_size: data.cell_size,
            bucket_seconds: data.bucket_seconds,
            present_pairs: data.present_count() as u64,
            ids: data.ids().to_vec(),
            codec,
            snapshots,
            segments,
        })
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn max_step(&self) -> u32 {
        self.max_step
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn instants(&self) -> u32 {
        self.instants
    }

    pub fn num_objects(&self) -> usize {
        self.ids.len()
    }

    /// Metres per cell side, as recorded by the ingest step.
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bucket_seconds(&self) -> f64 {
        self.bucket_seconds
    }

    /// External identifier of object `oid`.
    pub fn id(&self, oid: u32) -> Option<&str> {
        self.ids.get(oid as usize).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Object id of an external identifier.
    pub fn lookup(&self, id: &str) -> Option<u32> {
        self.ids.iter().position(|x| x == id).map(|i| i as u32)
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn segments(&self) -> &[LogSegment] {
        &self.segments
    }

    pub fn codec(&self) -> &LogCodec {
        &self.codec
    }

    pub fn snapshot_instant(&self, i: usize) -> u32 {
        self.segments[i].start()
    }

    pub fn is_snapshot_instant(&self, t: u32) -> bool {
        t < self.instants && t.is_multiple_of(self.params.snapshot_period)
    }

    fn view(&self, i: usize) -> SegmentView<'_> {
        SegmentView::new(&self.codec, &self.segments[i], &self.snapshots[i])
    }

    fn segment_of(&self, t: u32) -> usize {
        (t / self.params.snapshot_period) as usize
    }

    fn check_object(&self, oid: u32) -> Result<()> {
        if oid as usize >= self.ids.len() {
            return Err(Error::not_found(format!("object {oid}")));
        }
        Ok(())
    }

    fn check_instant(&self, t: u32) -> Result<()> {
        if t >= self.instants {
            return Err(Error::OutOfRange {
                pos: t as u64,
                len: self.instants as u64,
            });
        }
        Ok(())
    }

    pub fn object_position(&self, oid: u32, t: u32) -> Result<Option<Cell>> {
        self.object_position_traced(oid, t).map(|r| r.0)
    }

    pub fn object_position_traced(&self, oid: u32, t: u32) -> Result<(Option<Cell>, QueryCost)> {
        self.check_object(oid)?;
        self.check_instant(t)?;
        let i = self.segment_of(t);
        let view = self.view(i);
        let start = view.segment.start();
        let mut cost = QueryCost::default();
        if t == start {
            let snap = view.snapshot;
            let cell = if snap.is_placed(oid) {
                Some(snap.cell_of_object(oid)?)
            } else {
                None
            };
            return Ok((cell, cost));
        }
        let forward = t - start;
        let backward = (view.segment.end() - t) * self.params.bidirectional as u32;
        let accumulated = view
            .segment
            .accumulators()
            .filter(|a| (t - start) / a.interval() > 0)
            .map(|a| (t - start) % a.interval() + 1);
        let c = &mut cost.decoded_symbols;
        let cell = match accumulated {
            Some(a) if a < forward && (backward == 0 || a <= backward) => {
                view.position_at_accumulated(oid, t, c)?
            }
            _ if backward > 0 && backward < forward => view.position_at_backward(oid, t, c)?,
            _ => view.position_at(oid, t, c)?,
        };
        Ok((cell, cost))
    }

    /// Positions of `oid` at every instant of `[t1, t2]`.
    pub fn object_trajectory(&self, oid: u32, t1: u32, t2: u32) -> Result<Vec<Option<Cell>>> {
        self.object_trajectory_traced(oid, t1, t2).map(|r| r.0)
    }

    pub fn object_trajectory_traced(
        &self,
        oid: u32,
        t1: u32,
        t2: u32,
    ) -> Result<(Vec<Option<Cell>>, QueryCost)> {
        self.check_object(oid)?;
        self.check_instant(t2)?;
        if t1 > t2 {
            return Err(Error::validation(format!(
                "interval [{t1}, {t2}] is reversed"
            )));
        }
        let mut out = Vec::with_capacity((t2 - t1 + 1) as usize);
        let mut cost = QueryCost::default();
        for i in self.segment_of(t1)..=self.segment_of(t2) {
            let view = self.view(i);
            let a = t1.max(view.segment.start());
            let b = t2.min(view.segment.end() - 1);
            let mut cur = view.cursor(oid)?;
            out.push(cur.advance_to(a)?);
            for _ in a..b {
                cur.advance()?;
                out.push(cur.cell());
            }
            cost.decoded_symbols += cur.decoded();
        }
        Ok((out, cost))
    }

    /// Objects inside `rect` at instant `t`, ordered by object id.
    pub fn time_slice(&self, rect: Rect, t: u32) -> Result<Vec<(u32, Cell)>> {
        self.time_slice_traced(rect, t).map(|r| r.0)
    }

    pub fn time_slice_traced(&self, rect: Rect, t: u32) -> Result<(Vec<(u32, Cell)>, QueryCost)> {
        self.check_instant(t)?;
        let mut cost = QueryCost::default();
        let Some(rect) = rect.clip(self.rows, self.cols) else {
            return Ok((Vec::new(), cost));
        };
        let i = self.segment_of(t);
        let view = self.view(i);
        let start = view.segment.start();
        let end = view.segment.end();
        let ms = self.max_step as u64;
        let mut out = if t == start {
            view.snapshot.objects_in_region(rect)
        } else if self.params.bidirectional && end < self.instants && end - t < t - start {
            let right = &self.snapshots[i + 1];
            let reach = rect.expand(ms * (end - t) as u64, self.rows, self.cols);
            let mut cands: Vec<u32> = right
                .objects_in_region(reach)
                .into_iter()
                .map(|(o, _)| o)
                .collect();
            let tails = view
                .segment
                .tails()
                .expect("bidirectional segments carry tails");
            for (oid, tail) in tails.iter().enumerate() {
                let oid = oid as u32;
                if right.is_placed(oid) {
                    continue;
                }
                let near = match *tail {
                    TailEntry::Never => false,
                    TailEntry::Present(c) => rect.distance(c) <= ms * (end - 1 - t) as u64,
                    TailEntry::Absent { last_seen, cell } => {
                        last_seen >= t && rect.distance(cell) <= ms * (last_seen - t) as u64
                    }
                };
                if near {
                    cands.push(oid);
                }
            }
            cost.candidates = cands.len() as u64;
            view.follow_candidates_backward(&cands, rect, t, &mut cost.decoded_symbols)?
        } else {
            let cands = self.forward_candidates(i, rect, t);
            cost.candidates = cands.len() as u64;
            view.follow_candidates(&cands, rect, t, &mut cost.decoded_symbols)?
        };
        out.sort_unstable_by_key(|x| x.0);
        Ok((out, cost))
    }

    /// Objects of segment `i` that may be inside `rect` at some instant up
    /// to `t`: those placed in the expanded region at the left snapshot,
    /// plus those reappearing close enough.
    fn forward_candidates(&self, i: usize, rect: Rect, t: u32) -> Vec<(u32, Option<Cell>)> {
        let snap = &self.snapshots[i];
        let start = self.segments[i].start();
        let ms = self.max_step as u64;
        let reach = rect.expand(ms * (t - start) as u64, self.rows, self.cols);
        let mut cands: Vec<(u32, Option<Cell>)> = snap
            .objects_in_region(reach)
            .into_iter()
            .map(|(o, c)| (o, Some(c)))
            .collect();
        cands.extend(
            snap.abs_reappearances()
                .iter()
                .filter(|a| a.instant <= t && rect.distance(a.cell) <= ms * (t - a.instant) as u64)
                .map(|a| (a.oid, None)),
        );
        cands
    }

    /// Objects inside `rect` at some instant of `[t1, t2]`, with the first
    /// such instant and the cell there, ordered by object id.
    pub fn time_interval(&self, rect: Rect, t1: u32, t2: u32) -> Result<Vec<IntervalHit>> {
        self.time_interval_traced(rect, t1, t2).map(|r| r.0)
    }

    pub fn time_interval_traced(
        &self,
        rect: Rect,
        t1: u32,
        t2: u32,
    ) -> Result<(Vec<IntervalHit>, QueryCost)> {
        self.check_instant(t2)?;
        if t1 > t2 {
            return Err(Error::validation(format!(
                "interval [{t1}, {t2}] is reversed"
            )));
        }
        let mut cost = QueryCost::default();
        let Some(rect) = rect.clip(self.rows, self.cols) else {
            return Ok((Vec::new(), cost));
        };
        let mut out = Vec::new();
        let mut reported = HashSet::new();
        for i in self.segment_of(t1)..=self.segment_of(t2) {
            let view = self.view(i);
            let a = t1.max(view.segment.start());
            let b = t2.min(view.segment.end() - 1);
            let cands: Vec<_> = self
                .forward_candidates(i, rect, b)
                .into_iter()
                .filter(|c| !reported.contains(&c.0))
                .collect();
            cost.candidates += cands.len() as u64;
            for hit in view.first_inside(&cands, rect, a, b, &mut cost.decoded_symbols)? {
                reported.insert(hit.0);
                out.push(hit);
            }
        }
        out.sort_unstable_by_key(|x| x.0);
        Ok((out, cost))
    }

    pub fn stats(&self) -> SizeReport {
        let mut r = SizeReport {
            header_bytes: HEADER_BYTES,
            id_bytes: 8 + self.ids.iter().map(|s| 4 + s.len()).sum::<usize>(),
            model_bytes: self.codec.model.serialized_len(),
            offset_table_bytes: 8 + 16 * self.snapshots.len(),
            snapshots: self.snapshots.len(),
            stopper_count: self.codec.params.stoppers(),
            vocabulary: self.codec.model.len(),
            baseline_bytes: 8 * self.present_pairs,
            ..Default::default()
        };
        for s in &self.snapshots {
            r.snapshot_tree_bytes += s.tree_bytes();
            r.snapshot_attachment_bytes += s.attachment_bytes();
            r.reappearance_bytes += s.reappearance_bytes();
        }
        for g in &self.segments {
            r.log_bytes += g.stream_bytes();
            r.log_offset_bytes += g.offset_bytes();
            r.tail_bytes += g.tail_bytes();
            r.accumulator_bytes += g.accumulator_bytes();
            r.segment_overhead_bytes += g.serialized_len()
                - g.stream_bytes()
                - g.offset_bytes()
                - g.tail_bytes()
                - g.accumulator_bytes();
        }
        r.total_bytes = r.header_bytes
            + r.id_bytes
            + r.model_bytes
            + r.offset_table_bytes
            + r.snapshot_tree_bytes
            + r.snapshot_attachment_bytes
            + r.reappearance_bytes
            + r.log_bytes
            + r.log_offset_bytes
            + r.tail_bytes
            + r.accumulator_bytes
            + r.segment_overhead_bytes;
        r.ratio_percent =
            (r.baseline_bytes > 0).then(|| 100.0 * r.total_bytes as f64 / r.baseline_bytes as f64);
        r
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        let p = &self.params;
        w.u32(p.snapshot_period);
        w.u32(p.k);
        w.u32(self.max_step);
        w.u8(p.bidirectional as u8 | (p.accumulator_interval.is_some() as u8) << 1);
        w.u32(p.accumulator_interval.unwrap_or(0));
        w.u32(self.rows);
        w.u32(self.cols);
        w.u32(self.instants);
        w.u64(self.present_pairs);
        w.f64(self.cell_size);
        w.f64(self.bucket_seconds);
        debug_assert_eq!(w.len(), HEADER_BYTES);
        write_ids(&mut w, &self.ids);
        self.codec.model.write(&mut w, self.codec.params);
        let n = self.snapshots.len();
        w.u64(n as u64);
        let mut at = w.len() + 16 * n;
        for (s, g) in self.snapshots.iter().zip(&self.segments) {
            w.u64(at as u64);
            at += s.tree_bytes() + s.attachment_bytes() + s.reappearance_bytes();
            w.u64(at as u64);
            at += g.serialized_len();
        }
        for (s, g) in self.snapshots.iter().zip(&self.segments) {
            s.write(&mut w);
            g.write(&mut w);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::corrupt("not an index file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::corrupt(format!(
                "unsupported format version {version}"
            )));
        }
        let snapshot_period = r.u32()?;
        let k = r.u32()?;
        let max_step = r.u32()?;
        let flags = r.u8()?;
        let interval = r.u32()?;
        let rows = r.u32()?;
        let cols = r.u32()?;
        let instants = r.u32()?;
        let present_pairs = r.u64()?;
        let cell_size = r.f64()?;
        let bucket_seconds = r.f64()?;
        if snapshot_period == 0
            || k < 2
            || flags > 3
            || instants == 0
            || (flags & 2 != 0) != (interval > 0)
        {
            return Err(Error::corrupt("index parameters"));
        }
        let params = IndexParams {
            snapshot_period,
            k,
            max_step: Some(max_step),
            bidirectional: flags & 1 != 0,
            accumulator_interval: (flags & 2 != 0).then_some(interval),
        };
        let ids = read_ids(&mut r)?;
        let (model, scdc) = FrequencyModel::read(&mut r)?;
        let codec = LogCodec {
            model,
            params: scdc,
            space: SymbolSpace::new(max_step),
        };
        let n = r.len_u64()?;
        if n != instants.div_ceil(snapshot_period) as usize {
            return Err(Error::corrupt("snapshot count does not match the period"));
        }
        let mut offsets = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            offsets.push(r.u64()?);
        }
        let mut snapshots = Vec::with_capacity(n);
        let mut segments = Vec::with_capacity(n);
        for i in 0..n {
            if r.position() as u64 != offsets[2 * i] {
                return Err(Error::corrupt(format!("snapshot {i} offset")));
            }
            let s = Snapshot::read(&mut r)?;
            if r.position() as u64 != offsets[2 * i + 1] {
                return Err(Error::corrupt(format!("segment {i} offset")));
            }
            let g = LogSegment::read(&mut r)?;
            let start = i as u32 * snapshot_period;
            let end = (start + snapshot_period).min(instants);
            if g.start() != start
                || g.end() != end
                || g.num_objects() != ids.len()
                || s.num_objects() != ids.len()
                || s.tree().k() != k
                || g.tails().is_some() != params.bidirectional
                || g.accumulators().map(|a| a.interval()) != params.accumulator_interval
            {
                return Err(Error::corrupt(format!(
                    "segment {i} disagrees with the header"
                )));
            }
            snapshots.push(s);
            segments.push(g);
        }
        if !r.is_empty() {
            return Err(Error::corrupt("trailing bytes"));
        }
        Ok(Self {
            params,
            max_step,
            rows,
            cols,
            instants,
            cell_size,
            bucket_seconds,
            present_pairs,
            ids,
            codec,
            snapshots,
            segments,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

const HEADER_BYTES: usize = 4 + 4 + 4 + 4 + 4 + 1 + 4 + 4 + 4 + 4 + 8 + 8 + 8;
