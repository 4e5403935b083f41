use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NormalizedDataset;
use crate::Cell;

/// Knobs of the synthetic random-walk workload.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub objects: usize,
    pub instants: usize,
    pub rows: u32,
    pub cols: u32,
    /// Largest per-instant Chebyshev step.
    pub max_step: u32,
    /// Chance of standing still at an instant.
    pub stay_probability: f64,
    /// Chance of picking a new heading at an instant.
    pub turn_probability: f64,
    /// Chance that a move is longer than one cell.
    pub long_step_probability: f64,
    /// Per-instant chance that a visible object goes silent.
    pub disappearance_rate: f64,
    /// Longest silent span, in instants.
    pub max_gap: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            objects: 200,
            instants: 2000,
            rows: 256,
            cols: 256,
            max_step: 3,
            stay_probability: 0.3,
            turn_probability: 0.1,
            long_step_probability: 0.1,
            disappearance_rate: 0.002,
            max_gap: 40,
            seed: 42,
        }
    }
}

const HEADINGS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Correlated random walks: each object keeps a heading for a while, mostly
/// moves one cell or stays, and occasionally goes silent while it keeps
/// moving unseen. Same parameters, same dataset.
pub fn generate_synthetic(p: &SyntheticParams) -> NormalizedDataset {
    let rows = p.rows.max(1);
    let cols = p.cols.max(1);
    let mut ds = NormalizedDataset::with_objects(rows, cols, p.instants, p.objects);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    for oid in 0..p.objects as u32 {
        let mut row = rng.gen_range(0..rows) as i64;
        let mut col = rng.gen_range(0..cols) as i64;
        let mut heading = HEADINGS[rng.gen_range(0..HEADINGS.len())];
        let mut silent = 0usize;
        for t in 0..p.instants {
            if t > 0 {
                if rng.gen_bool(p.turn_probability.clamp(0.0, 1.0)) {
                    heading = HEADINGS[rng.gen_range(0..HEADINGS.len())];
                }
                if p.max_step > 0 && !rng.gen_bool(p.stay_probability.clamp(0.0, 1.0)) {
                    let len = if p.max_step > 1
                        && rng.gen_bool(p.long_step_probability.clamp(0.0, 1.0))
                    {
                        rng.gen_range(2..=p.max_step) as i64
                    } else {
                        1
                    };
                    let (mut nr, mut nc) = (row + heading.0 * len, col + heading.1 * len);
                    if nr < 0 || nr >= rows as i64 {
                        heading.0 = -heading.0;
                        nr = nr.clamp(0, rows as i64 - 1);
                    }
                    if nc < 0 || nc >= cols as i64 {
                        heading.1 = -heading.1;
                        nc = nc.clamp(0, cols as i64 - 1);
                    }
                    row = nr;
                    col = nc;
                }
                if silent > 0 {
                    silent -= 1;
                } else if p.max_gap > 0 && rng.gen_bool(p.disappearance_rate.clamp(0.0, 1.0)) {
                    silent = rng.gen_range(1..=p.max_gap);
                }
            }
            if silent == 0 {
                ds.set(oid, t, Some(Cell::new(row as u32, col as u32)))
                    .expect("walk stays on the grid");
            }
        }
    }
    ds
}
