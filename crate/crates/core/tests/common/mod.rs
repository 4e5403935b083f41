#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajectory_index::ingest::{generate_synthetic, SyntheticParams};
use trajectory_index::{Cell, NormalizedDataset, Rect};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn synthetic(seed: u64, objects: usize, instants: usize, side: u32) -> NormalizedDataset {
    generate_synthetic(&SyntheticParams {
        objects,
        instants,
        rows: side,
        cols: side,
        seed,
        ..Default::default()
    })
}

pub fn oracle_slice(data: &NormalizedDataset, rect: Rect, t: u32) -> Vec<(u32, Cell)> {
    (0..data.num_objects() as u32)
        .filter_map(|o| {
            data.get(o, t as usize)
                .filter(|c| rect.contains(*c))
                .map(|c| (o, c))
        })
        .collect()
}

pub fn oracle_interval(
    data: &NormalizedDataset,
    rect: Rect,
    t1: u32,
    t2: u32,
) -> Vec<(u32, u32, Cell)> {
    (0..data.num_objects() as u32)
        .filter_map(|o| {
            (t1..=t2).find_map(|t| {
                data.get(o, t as usize)
                    .filter(|c| rect.contains(*c))
                    .map(|c| (o, t, c))
            })
        })
        .collect()
}

/// A rectangle with sides up to a quarter of the grid.
pub fn random_rect(rng: &mut impl Rng, rows: u32, cols: u32) -> Rect {
    let h = rng.gen_range(1..=(rows / 4).max(1));
    let w = rng.gen_range(1..=(cols / 4).max(1));
    let r = rng.gen_range(0..=rows - h);
    let c = rng.gen_range(0..=cols - w);
    Rect::new(r, c, r + h - 1, c + w - 1)
}
