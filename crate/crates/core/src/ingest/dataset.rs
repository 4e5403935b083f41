use std::io::Write;

use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};
use crate::Cell;

/// Positions on a regular grid at regular instants: for every object and
/// instant, either a cell or nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDataset {
    rows: u32,
    cols: u32,
    instants: usize,
    /// Side of a cell in input units.
    pub cell_size: f64,
    /// Length of an instant in seconds.
    pub bucket_seconds: f64,
    ids: Vec<String>,
    /// Object-major: `positions[oid * instants + t]`.
    positions: Vec<Option<Cell>>,
}

impl NormalizedDataset {
    /// All objects absent everywhere.
    pub fn new(rows: u32, cols: u32, instants: usize, ids: Vec<String>) -> Self {
        Self {
            rows,
            cols,
            instants,
            cell_size: 1.0,
            bucket_seconds: 1.0,
            positions: vec![None; ids.len() * instants],
            ids,
        }
    }

    /// Objects named `0..n` as strings.
    pub fn with_objects(rows: u32, cols: u32, instants: usize, n: usize) -> Self {
        Self::new(
            rows,
            cols,
            instants,
            (0..n).map(|i| i.to_string()).collect(),
        )
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn instants(&self) -> usize {
        self.instants
    }

    pub fn num_objects(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, oid: u32, t: usize) -> Option<Cell> {
        self.positions[oid as usize * self.instants + t]
    }

    pub fn set(&mut self, oid: u32, t: usize, cell: Option<Cell>) -> Result<()> {
        if let Some(c) = cell {
            if c.row >= self.rows || c.col >= self.cols {
                return Err(Error::validation(format!(
                    "cell ({}, {}) outside {}x{} grid",
                    c.row, c.col, self.rows, self.cols
                )));
            }
        }
        if oid as usize >= self.ids.len() || t >= self.instants {
            return Err(Error::OutOfRange {
                pos: t as u64,
                len: self.instants as u64,
            });
        }
        self.positions[oid as usize * self.instants + t] = cell;
        Ok(())
    }

    pub fn trajectory(&self, oid: u32) -> &[Option<Cell>] {
        let s = oid as usize * self.instants;
        &self.positions[s..s + self.instants]
    }

    /// Number of (object, instant) pairs with a position.
    pub fn present_count(&self) -> usize {
        self.positions.iter().filter(|p| p.is_some()).count()
    }

    /// Smallest per-instant speed bound, in cells: for any two consecutive
    /// observations of an object `t1 < t2`, the Chebyshev distance between
    /// them is at most `max_step * (t2 - t1)`.
    pub fn max_step(&self) -> u32 {
        let mut best = 0u64;
        for oid in 0..self.ids.len() as u32 {
            let mut last: Option<(usize, Cell)> = None;
            for (t, p) in self.trajectory(oid).iter().enumerate() {
                if let Some(c) = *p {
                    if let Some((lt, lc)) = last {
                        best = best.max(lc.chebyshev(c).div_ceil((t - lt) as u64));
                    }
                    last = Some((t, c));
                }
            }
        }
        best as u32
    }

    /// Objects present at instant `t`, in id order.
    pub fn placements_at(&self, t: usize) -> Vec<(u32, Cell)> {
        (0..self.ids.len() as u32)
            .filter_map(|o| self.get(o, t).map(|c| (o, c)))
            .collect()
    }

    /// Dumps `id,instant,row,col` lines for every present pair.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "instant", "row", "col"])
            .map_err(csv_err)?;
        for oid in 0..self.ids.len() as u32 {
            for (t, p) in self.trajectory(oid).iter().enumerate() {
                if let Some(c) = p {
                    w.write_record([
                        self.ids[oid as usize].as_str(),
                        &t.to_string(),
                        &c.row.to_string(),
                        &c.col.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `id,instant,row,col` lines as written by
    /// [`write_csv`](Self::write_csv). Ids keep their order of first
    /// appearance; the grid and instant count are the smallest that hold
    /// every line unless `grid` fixes `(rows, cols)`.
    pub fn read_csv<R: std::io::Read>(input: R, grid: Option<(u32, u32)>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != ["id", "instant", "row", "col"] {
            return Err(Error::validation(format!(
                "expected header id,instant,row,col, got {header:?}"
            )));
        }
        let mut ids: Vec<String> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut lines = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::validation(format!("line {}: {e}", n + 2)))?;
            let num = |i: usize| -> Result<u32> {
                rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| {
                    Error::validation(format!("line {}: bad field {}", n + 2, i + 1))
                })
            };
            let id = rec.get(0).unwrap_or_default().to_string();
            let oid = *index.entry(id.clone()).or_insert_with(|| {
                ids.push(id);
                ids.len() - 1
            });
            lines.push((oid as u32, num(1)? as usize, Cell::new(num(2)?, num(3)?)));
        }
        let instants = lines.iter().map(|l| l.1 + 1).max().unwrap_or(0);
        let (rows, cols) = grid.unwrap_or_else(|| {
            (
                lines.iter().map(|l| l.2.row + 1).max().unwrap_or(0),
                lines.iter().map(|l| l.2.col + 1).max().unwrap_or(0),
            )
        });
        let mut d = Self::new(rows, cols, instants, ids);
        for (oid, t, c) in lines {
            if d.get(oid, t).is_some() {
                return Err(Error::validation(format!(
                    "object {} listed twice at instant {t}",
                    d.ids[oid as usize]
                )));
            }
            d.set(oid, t, Some(c))?;
        }
        Ok(d)
    }

    /// Binary block: grid, instants, cell size, bucket, ids, then per object
    /// a presence bitmap followed by the present cells.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.rows);
        w.u32(self.cols);
        w.u64(self.instants as u64);
        w.f64(self.cell_size);
        w.f64(self.bucket_seconds);
        write_ids(&mut w, &self.ids);
        for oid in 0..self.ids.len() as u32 {
            let traj = self.trajectory(oid);
            crate::succinct::BitSequence::from_bits(traj.iter().map(Option::is_some)).write(&mut w);
            for c in traj.iter().flatten() {
                w.u32(c.row);
                w.u32(c.col);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let rows = r.u32()?;
        let cols = r.u32()?;
        let instants = r.len_u64()?;
        let cell_size = r.f64()?;
        let bucket_seconds = r.f64()?;
        let ids = read_ids(&mut r)?;
        let mut d = Self::new(rows, cols, instants, ids);
        d.cell_size = cell_size;
        d.bucket_seconds = bucket_seconds;
        for oid in 0..d.ids.len() as u32 {
            let mask = crate::succinct::BitSequence::read(&mut r)?;
            if mask.len() != instants {
                return Err(Error::corrupt("presence bitmap length"));
            }
            for t in 0..instants {
                if mask.get(t) {
                    let c = Cell::new(r.u32()?, r.u32()?);
                    d.set(oid, t, Some(c))
                        .map_err(|e| Error::corrupt(e.to_string()))?;
                }
            }
        }
        Ok(d)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub(crate) fn write_ids(w: &mut Writer, ids: &[String]) {
    w.u64(ids.len() as u64);
    for id in ids {
        w.u32(id.len() as u32);
        w.bytes(id.as_bytes());
    }
}

pub(crate) fn read_ids(r: &mut Reader<'_>) -> Result<Vec<String>> {
    let n = r.len_u64()?;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::corrupt("object id is not UTF-8"))?;
        ids.push(s.to_owned());
    }
    Ok(ids)
}
