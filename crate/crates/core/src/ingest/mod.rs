//! From raw position reports to a [`NormalizedDataset`], plus a synthetic
//! workload generator.

mod dataset;
mod normalize;
mod synthetic;

pub use dataset::NormalizedDataset;
pub(crate) use dataset::{read_ids, write_ids};
pub use normalize::{
    normalize, read_reports, LineError, NormalizeOutput, NormalizeParams, RawReport,
};
pub use synthetic::{generate_synthetic, SyntheticParams};
