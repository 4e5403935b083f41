use crate::{Failure, INTERNAL, USAGE};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;
use trajectory_index::ingest::{generate_synthetic, SyntheticParams};
use trajectory_index::{IndexParams, NormalizedDataset, Rect, TrajectoryIndex};

#[derive(Args, Debug)]
pub(crate) struct BenchArgs {
    /// Snapshot periods to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [15, 30, 60, 120])]
    periods: Vec<u32>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    objects: usize,
    #[arg(long, default_value_t = 2000)]
    instants: usize,
    /// Side of the square grid.
    #[arg(long, default_value_t = 256)]
    grid: u32,
    #[arg(long, default_value_t = 100)]
    object_queries: usize,
    #[arg(long, default_value_t = 50)]
    slice_queries: usize,
    /// Write the sweep CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-position costs (snapshot, quarters) for the largest period.
    #[arg(long)]
    positions_out: Option<PathBuf>,
}

#[derive(Default)]
struct Mix {
    obj_us: f64,
    slice_us: f64,
    obj_decoded: u64,
    slice_decoded: u64,
}

fn random_rect(rng: &mut ChaCha8Rng, side: u32) -> Rect {
    let h = rng.gen_range(1..=(side / 8).max(1));
    let w = rng.gen_range(1..=(side / 8).max(1));
    let r = rng.gen_range(0..=side - h);
    let c = rng.gen_range(0..=side - w);
    Rect::new(r, c, r + h - 1, c + w - 1)
}

/// Runs `n_obj` object queries and `n_slice` slices at instants drawn by `at`.
fn run_mix(
    idx: &TrajectoryIndex,
    rng: &mut ChaCha8Rng,
    n_obj: usize,
    n_slice: usize,
    mut at: impl FnMut(&mut ChaCha8Rng) -> u32,
) -> Result<Mix, Failure> {
    let fail = |e: trajectory_index::Error| Failure::new(INTERNAL, e.to_string());
    let mut m = Mix::default();
    let objects = idx.num_objects() as u32;
    let side = idx.rows().min(idx.cols());
    let started = Instant::now();
    for _ in 0..n_obj {
        let t = at(rng);
        let oid = rng.gen_range(0..objects);
        m.obj_decoded += idx
            .object_position_traced(oid, t)
            .map_err(fail)?
            .1
            .decoded_symbols;
    }
    m.obj_us = started.elapsed().as_secs_f64() * 1e6 / n_obj.max(1) as f64;
    let started = Instant::now();
    for _ in 0..n_slice {
        let t = at(rng);
        let rect = random_rect(rng, side);
        m.slice_decoded += idx
            .time_slice_traced(rect, t)
            .map_err(fail)?
            .1
            .decoded_symbols;
    }
    m.slice_us = started.elapsed().as_secs_f64() * 1e6 / n_slice.max(1) as f64;
    Ok(m)
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::new(USAGE, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dataset(a: &BenchArgs) -> NormalizedDataset {
    generate_synthetic(&SyntheticParams {
        objects: a.objects,
        instants: a.instants,
        rows: a.grid,
        cols: a.grid,
        seed: a.seed,
        ..Default::default()
    })
}

pub(crate) fn run(a: BenchArgs) -> Result<(), Failure> {
    if a.periods.is_empty()
        || a.periods.contains(&0)
        || a.objects == 0
        || a.instants == 0
        || a.grid == 0
    {
        return Err(Failure::new(
            USAGE,
            "periods, objects, instants and grid must be positive",
        ));
    }
    let data = dataset(&a);
    let mut csv = String::from("P,size_bytes,ratio,avg_obj_us,avg_slice_us,avg_decoded_symbols\n");
    let mut largest = None;
    for &p in &a.periods {
        let idx = TrajectoryIndex::build(
            &data,
            &IndexParams {
                snapshot_period: p,
                ..Default::default()
            },
        )
        .map_err(|e| Failure::new(INTERNAL, e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ p as u64);
        let n = idx.instants();
        let m = run_mix(&idx, &mut rng, a.object_queries, a.slice_queries, |r| {
            r.gen_range(0..n)
        })?;
        let s = idx.stats();
        let queries = (a.object_queries + a.slice_queries).max(1) as f64;
        let _ = writeln!(
            csv,
            "{p},{},{},{:.3},{:.3},{:.3}",
            s.total_bytes,
            s.ratio_percent.map_or("n/a".into(), |r| format!("{r:.3}")),
            m.obj_us,
            m.slice_us,
            (m.obj_decoded + m.slice_decoded) as f64 / queries
        );
        if largest.as_ref().is_none_or(|(q, _)| p > *q) {
            largest = Some((p, idx));
        }
    }
    write_out(&a.out, &csv)?;
    if a.positions_out.is_some() {
        let (p, idx) = largest.expect("at least one period");
        let segments = (idx.instants() - 1) / p;
        if segments == 0 {
            return Err(Failure::new(
                USAGE,
                "the workload must span at least two snapshots",
            ));
        }
        let mut csv = String::from(
            "position,offset,avg_obj_us,avg_slice_us,avg_obj_decoded,avg_slice_decoded\n",
        );
        for (name, off) in [
            ("snapshot", 0),
            ("q1", p / 4),
            ("middle", p / 2),
            ("q3", 3 * p / 4),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let m = run_mix(&idx, &mut rng, 50, 50, |r| {
                r.gen_range(0..segments) * p + off
            })?;
            let _ = writeln!(
                csv,
                "{name},{off},{:.3},{:.3},{:.3},{:.3}",
                m.obj_us,
                m.slice_us,
                m.obj_decoded as f64 / 50.0,
                m.slice_decoded as f64 / 50.0
            );
        }
        write_out(&a.positions_out, &csv)?;
    }
    Ok(())
}
