//! Bit sequences with rank/select, fixed-width integer vectors, and
//! permutations whose inverse is accelerated by cycle shortcuts.

mod bits;
mod intvec;
mod perm;

pub use bits::BitSequence;
pub use intvec::IntVector;
pub use perm::ShortcutPermutation;
