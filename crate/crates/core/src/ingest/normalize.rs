use std::collections::HashMap;
use std::io::Read;

use super::NormalizedDataset;
use crate::error::{Error, Result};
use crate::Cell;

/// One position report as received.
#[derive(Clone, Debug, PartialEq)]
pub struct RawReport {
    pub id: String,
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
}

/// A CSV line that could not be turned into a report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

/// Reads `id,timestamp,x,y` CSV. Bad lines are skipped and reported.
pub fn read_reports<R: Read>(input: R) -> Result<(Vec<RawReport>, Vec<LineError>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::validation(format!("unreadable CSV header: {e}")))?
        .clone();
    let expected = ["id", "timestamp", "x", "y"];
    if header.len() < 4 || expected.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(Error::validation(format!(
            "expected header `id,timestamp,x,y`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(LineError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match parse_record(&rec) {
            Ok(r) => reports.push(r),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    Ok((reports, errors))
}

fn parse_record(rec: &csv::StringRecord) -> std::result::Result<RawReport, String> {
    if rec.len() != 4 {
        return Err(format!("expected 4 fields, found {}", rec.len()));
    }
    let num = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let v: f64 = rec[i]
            .parse()
            .map_err(|_| format!("{name} `{}` is not a number", &rec[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name} is not finite"))
        }
    };
    let id = rec[0].to_owned();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let timestamp = num(1, "timestamp")?;
    if timestamp < 0.0 {
        return Err("negative timestamp".into());
    }
    Ok(RawReport {
        id,
        timestamp,
        x: num(2, "x")?,
        y: num(3, "y")?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizeParams {
    /// Side of a grid cell, in coordinate units.
    pub cell_size: f64,
    /// Length of one instant, in seconds.
    pub bucket_seconds: f64,
    /// Fastest plausible speed, in coordinate units per second.
    pub max_speed: f64,
    /// `(x, y)` of the north-west corner of cell (0, 0). Defaults to the
    /// minimum `x` and maximum `y` of the input.
    pub origin: Option<(f64, f64)>,
    /// Fixed `(rows, cols)`; defaults to the smallest grid holding every cell.
    pub grid: Option<(u32, u32)>,
}

impl Default for NormalizeParams {
    fn default() -> Self {
        Self {
            cell_size: 30.0,
            bucket_seconds: 60.0,
            max_speed: 60.0 * 1852.0 / 3600.0,
            origin: None,
            grid: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NormalizeOutput {
    pub dataset: NormalizedDataset,
    /// Reports dropped for implying a speed above the limit.
    pub outliers: usize,
    /// Dropped reports replaced by an interpolated position.
    pub interpolated: usize,
    /// Instants filled inside silent gaps with an unchanged position.
    pub filled: usize,
    /// Reports falling outside a fixed grid.
    pub off_grid: usize,
}

#[derive(Clone, Copy, Debug)]
struct Fix {
    ts: f64,
    x: f64,
    y: f64,
}

pub fn normalize(reports: &[RawReport], p: &NormalizeParams) -> Result<NormalizeOutput> {
    if !(p.cell_size > 0.0 && p.bucket_seconds > 0.0 && p.max_speed > 0.0) {
        return Err(Error::validation(
            "cell size, bucket length and max speed must be positive",
        ));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut per_object: Vec<Vec<(usize, &RawReport)>> = Vec::new();
    for (order, r) in reports.iter().enumerate() {
        let oid = *index.entry(r.id.as_str()).or_insert_with(|| {
            ids.push(r.id.clone());
            per_object.push(Vec::new());
            ids.len() - 1
        });
        per_object[oid].push((order, r));
    }
    let max_ts = reports.iter().map(|r| r.timestamp).fold(f64::NAN, f64::max);
    let instants = if reports.is_empty() {
        0
    } else {
        (max_ts / p.bucket_seconds).ceil() as usize + 1
    };
    let (ox, oy) = p.origin.unwrap_or_else(|| {
        let min_x = reports.iter().map(|r| r.x).fold(f64::INFINITY, f64::min);
        let max_y = reports
            .iter()
            .map(|r| r.y)
            .fold(f64::NEG_INFINITY, f64::max);
        (min_x, max_y)
    });

    let mut outliers = 0;
    let mut interpolated = 0;
    let mut off_grid = 0;
    let mut cells: Vec<Vec<Option<(i64, i64)>>> = Vec::with_capacity(ids.len());
    for reps in &per_object {
        // nearest report to each instant centre; earlier report wins ties
        let mut chosen: Vec<Option<(f64, usize, Fix)>> = vec![None; instants];
        for &(order, r) in reps {
            let i = ((r.timestamp / p.bucket_seconds) + 0.5).floor() as usize;
            let dist = (r.timestamp - i as f64 * p.bucket_seconds).abs();
            let fix = Fix {
                ts: r.timestamp,
                x: r.x,
                y: r.y,
            };
            let better = match chosen[i] {
                None => true,
                Some((d, o, f)) => {
                    dist < d || (dist == d && (fix.ts < f.ts || (fix.ts == f.ts && order < o)))
                }
            };
            if better {
                chosen[i] = Some((dist, order, fix));
            }
        }
        let mut fixes: Vec<Option<Fix>> = chosen.into_iter().map(|c| c.map(|c| c.2)).collect();

        // speed filter against the last accepted fix
        let mut dropped = Vec::new();
        let mut prev: Option<Fix> = None;
        for (i, slot) in fixes.iter_mut().enumerate() {
            let Some(f) = *slot else { continue };
            if let Some(pf) = prev {
                let dt = f.ts - pf.ts;
                let dist = (f.x - pf.x).hypot(f.y - pf.y);
                if dist > 0.0 && (dt <= 0.0 || dist / dt > p.max_speed) {
                    dropped.push(i);
                    *slot = None;
                    continue;
                }
            }
            prev = Some(f);
        }
        outliers += dropped.len();
        for &i in &dropped {
            let before = fixes[..i].iter().rev().flatten().next().copied();
            let after = fixes[i + 1..].iter().flatten().next().copied();
            if let (Some(a), Some(b)) = (before, after) {
                let tc = i as f64 * p.bucket_seconds;
                let f = if b.ts > a.ts {
                    ((tc - a.ts) / (b.ts - a.ts)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                fixes[i] = Some(Fix {
                    ts: tc,
                    x: a.x + (b.x - a.x) * f,
                    y: a.y + (b.y - a.y) * f,
                });
                interpolated += 1;
            }
        }
        // interpolated fixes were computed from accepted neighbours only
        cells.push(
            fixes
                .iter()
                .map(|f| {
                    f.map(|f| {
                        (
                            ((oy - f.y) / p.cell_size).floor() as i64,
                            ((f.x - ox) / p.cell_size).floor() as i64,
                        )
                    })
                })
                .collect(),
        );
    }

    let (rows, cols) = p.grid.unwrap_or_else(|| {
        let mut r = 0i64;
        let mut c = 0i64;
        for (row, col) in cells.iter().flatten().flatten() {
            r = r.max(row + 1);
            c = c.max(col + 1);
        }
        (
            r.clamp(0, u32::MAX as i64) as u32,
            c.clamp(0, u32::MAX as i64) as u32,
        )
    });

    let mut ds = NormalizedDataset::new(rows, cols, instants, ids);
    ds.cell_size = p.cell_size;
    ds.bucket_seconds = p.bucket_seconds;
    let mut filled = 0;
    for (oid, traj) in cells.iter().enumerate() {
        let mut last: Option<(usize, Cell)> = None;
        for (t, c) in traj.iter().enumerate() {
            let Some((row, col)) = *c else { continue };
            if row < 0 || col < 0 || row >= rows as i64 || col >= cols as i64 {
                off_grid += 1;
                continue;
            }
            let cell = Cell::new(row as u32, col as u32);
            ds.set(oid as u32, t, Some(cell))?;
            if let Some((lt, lc)) = last {
                if lc == cell && t > lt + 1 {
                    for g in lt + 1..t {
                        ds.set(oid as u32, g, Some(cell))?;
                        filled += 1;
                    }
                }
            }
            last = Some((t, cell));
        }
    }
    Ok(NormalizeOutput {
        dataset: ds,
        outliers,
        interpolated,
        filled,
        off_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(id: &str, ts: f64, x: f64, y: f64) -> RawReport {
        RawReport {
            id: id.into(),
            timestamp: ts,
            x,
            y,
        }
    }

    fn params() -> NormalizeParams {
        NormalizeParams {
            cell_size: 10.0,
            bucket_seconds: 60.0,
            max_speed: 1.0,
            origin: Some((0.0, 0.0)),
            grid: None,
        }
    }

    #[test]
    fn bucket_centre_and_windows() {
        let reps = [
            rep("a", 60.0, 5.0, -5.0),
            rep("b", 30.0, 5.0, -5.0),
            rep("b", 89.0, 15.0, -5.0),
        ];
        let out = normalize(&reps, &params()).unwrap();
        let d = &out.dataset;
        assert_eq!(d.instants(), 3); // ceil(89/60) + 1
        assert_eq!(d.get(0, 1), Some(Cell::new(0, 0)));
        assert_eq!(d.get(0, 0), None);
        // 30s sits on a window boundary and belongs to instant 1, but 89s is
        // nearer to that instant's centre.
        assert_eq!(d.get(1, 1), Some(Cell::new(0, 1)));
        assert_eq!(d.get(1, 0), None);
    }

    #[test]
    fn tie_goes_to_earlier_report() {
        let reps = [rep("a", 70.0, 25.0, -5.0), rep("a", 50.0, 5.0, -5.0)];
        let d = normalize(&reps, &params()).unwrap().dataset;
        assert_eq!(d.get(0, 1), Some(Cell::new(0, 0)));
    }

    #[test]
    fn unchanged_position_fills_gap() {
        let reps = [
            rep("a", 0.0, 5.0, -5.0),
            rep("a", 300.0, 5.0, -5.0),
            rep("a", 360.0, 15.0, -5.0),
            rep("a", 600.0, 45.0, -5.0),
        ];
        let out = normalize(&reps, &params()).unwrap();
        let d = &out.dataset;
        for t in 0..=5 {
            assert_eq!(d.get(0, t), Some(Cell::new(0, 0)), "instant {t}");
        }
        assert_eq!(d.get(0, 6), Some(Cell::new(0, 1)));
        // different bounding cells: the gap stays empty
        for t in 7..10 {
            assert_eq!(d.get(0, t), None);
        }
        assert_eq!(out.filled, 4);
    }

    #[test]
    fn outlier_is_interpolated() {
        // steady eastward motion of 30 units per minute, with a spike at t=2
        let reps = [
            rep("a", 0.0, 0.0, -5.0),
            rep("a", 60.0, 30.0, -5.0),
            rep("a", 120.0, 5000.0, -5.0),
            rep("a", 180.0, 90.0, -5.0),
            rep("a", 240.0, 120.0, -5.0),
        ];
        let out = normalize(&reps, &params()).unwrap();
        assert_eq!(out.outliers, 1);
        assert_eq!(out.interpolated, 1);
        let cols: Vec<u32> = (0..5).map(|t| out.dataset.get(0, t).unwrap().col).collect();
        // x = 60 at t=2 lies halfway between 30 and 90
        assert_eq!(cols, vec![0, 3, 6, 9, 12]);
    }

    #[test]
    fn trailing_outlier_is_dropped() {
        let reps = [rep("a", 0.0, 0.0, -5.0), rep("a", 60.0, 9000.0, -5.0)];
        let out = normalize(&reps, &params()).unwrap();
        assert_eq!(out.outliers, 1);
        assert_eq!(out.dataset.get(0, 1), None);
    }

    #[test]
    fn csv_errors_are_per_line() {
        let text = "id,timestamp,x,y\na,0,1,2\nb,zero,1,2\nc,5,1\nd,-1,0,0\ne,60,3,4\n";
        let (reps, errs) = read_reports(text.as_bytes()).unwrap();
        assert_eq!(reps.len(), 2);
        assert_eq!(
            errs.iter().map(|e| e.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert!(read_reports("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn ids_in_first_appearance_order() {
        let reps = [
            rep("z", 0.0, 0.0, 0.0),
            rep("a", 0.0, 0.0, 0.0),
            rep("z", 60.0, 0.0, 0.0),
        ];
        let d = normalize(&reps, &params()).unwrap().dataset;
        assert_eq!(d.ids(), &["z".to_string(), "a".to_string()]);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params();
        p.cell_size = 0.0;
        assert!(normalize(&[], &p).is_err());
        let d = normalize(&[], &params()).unwrap().dataset;
        assert_eq!(d.instants(), 0);
    }
}
