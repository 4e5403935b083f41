use std::fmt;

use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

const WORD_BITS: usize = 64;
/// Words per rank superblock (512 bits).
const SUPER_WORDS: usize = 8;
const SUPER_BITS: usize = WORD_BITS * SUPER_WORDS;

/// An immutable bit array with a sampled rank directory.
///
/// Positions are 0-based. [`rank`](Self::rank) counts occurrences up to and
/// including the given position, and [`select`](Self::select) takes a 1-based
/// occurrence number, with `select(b, 0) == -1`.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct BitSequence {
    words: Vec<u64>,
    len: usize,
    ones: usize,
    /// Ones strictly before each superblock.
    supers: Vec<usize>,
}

impl BitSequence {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0usize;
        for b in bits {
            if len.is_multiple_of(WORD_BITS) {
                words.push(0u64);
            }
            if b {
                *words.last_mut().unwrap() |= 1 << (len % WORD_BITS);
            }
            len += 1;
        }
        Self::from_words(words, len)
    }

    /// Bits given as little-endian words; bits past `len` are cleared.
    fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.truncate(len.div_ceil(WORD_BITS));
        words.resize(len.div_ceil(WORD_BITS), 0);
        if !len.is_multiple_of(WORD_BITS) {
            let last = words.len() - 1;
            words[last] &= (1u64 << (len % WORD_BITS)) - 1;
        }
        let mut supers = Vec::with_capacity(words.len() / SUPER_WORDS + 1);
        let mut acc = 0usize;
        for chunk in words.chunks(SUPER_WORDS) {
            supers.push(acc);
            acc += chunk.iter().map(|w| w.count_ones() as usize).sum::<usize>();
        }
        Self {
            words,
            len,
            ones: acc,
            supers,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.ones
    }

    pub fn count(&self, bit: bool) -> usize {
        if bit {
            self.ones
        } else {
            self.count_zeros()
        }
    }

    /// Bit at `pos`. Panics when out of range, like slice indexing.
    #[inline]
    pub fn get(&self, pos: usize) -> bool {
        assert!(pos < self.len, "bit {pos} out of range ({})", self.len);
        (self.words[pos / WORD_BITS] >> (pos % WORD_BITS)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Ones in `[0, pos)`; `pos` may equal `len`.
    #[inline]
    pub fn ones_before(&self, pos: usize) -> usize {
        debug_assert!(pos <= self.len);
        let word = pos / WORD_BITS;
        let sb = word / SUPER_WORDS;
        let mut r = if sb < self.supers.len() {
            self.supers[sb]
        } else {
            return self.ones;
        };
        for w in &self.words[sb * SUPER_WORDS..word] {
            r += w.count_ones() as usize;
        }
        let rem = pos % WORD_BITS;
        if rem != 0 {
            r += (self.words[word] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        r
    }

    /// Zeros in `[0, pos)`.
    #[inline]
    pub fn zeros_before(&self, pos: usize) -> usize {
        pos - self.ones_before(pos)
    }

    /// Occurrences of `bit` in `[0, pos]`.
    pub fn rank(&self, bit: bool, pos: usize) -> Result<usize> {
        if pos >= self.len {
            return Err(Error::OutOfRange {
                pos: pos as u64,
                len: self.len as u64,
            });
        }
        let ones = self.ones_before(pos + 1);
        Ok(if bit { ones } else { pos + 1 - ones })
    }

    pub fn rank1(&self, pos: usize) -> Result<usize> {
        self.rank(true, pos)
    }

    pub fn rank0(&self, pos: usize) -> Result<usize> {
        self.rank(false, pos)
    }

    /// Position of the `n`-th occurrence of `bit` (1-based); `-1` for `n == 0`.
    pub fn select(&self, bit: bool, n: usize) -> Result<isize> {
        if n == 0 {
            return Ok(-1);
        }
        let found = if bit {
            self.select1(n)
        } else {
            self.select0(n)
        };
        found.map(|p| p as isize).ok_or_else(|| {
            Error::not_found(format!(
                "occurrence {n} of bit {} (only {})",
                bit as u8,
                self.count(bit)
            ))
        })
    }

    /// Position of the `n`-th one, `n >= 1`.
    pub fn select1(&self, n: usize) -> Option<usize> {
        if n == 0 || n > self.ones {
            return None;
        }
        let sb = self.supers.partition_point(|&r| r < n) - 1;
        let mut remaining = n - self.supers[sb];
        for (wi, &w) in self.words.iter().enumerate().skip(sb * SUPER_WORDS) {
            let c = w.count_ones() as usize;
            if remaining <= c {
                return Some(wi * WORD_BITS + select_in_word(w, remaining));
            }
            remaining -= c;
        }
        unreachable!("rank directory inconsistent with words")
    }

    /// Position of the `n`-th zero, `n >= 1`.
    pub fn select0(&self, n: usize) -> Option<usize> {
        if n == 0 || n > self.count_zeros() {
            return None;
        }
        let zeros_before_super = |s: usize| s * SUPER_BITS - self.supers[s];
        let (mut sb, mut hi) = (0, self.supers.len());
        while hi - sb > 1 {
            let mid = (sb + hi) / 2;
            if zeros_before_super(mid) < n {
                sb = mid;
            } else {
                hi = mid;
            }
        }
        let mut remaining = n - zeros_before_super(sb);
        for wi in sb * SUPER_WORDS..self.words.len() {
            let mut w = !self.words[wi];
            let valid = self.len - wi * WORD_BITS;
            if valid < WORD_BITS {
                w &= (1u64 << valid) - 1;
            }
            let c = w.count_ones() as usize;
            if remaining <= c {
                return Some(wi * WORD_BITS + select_in_word(w, remaining));
            }
            remaining -= c;
        }
        unreachable!("rank directory inconsistent with words")
    }

    /// Serialized as length (u64 LE) then the packed bits, LSB-first within
    /// each byte, padded to a byte boundary.
    pub(crate) fn write(&self, w: &mut Writer) {
        w.u64(self.len as u64);
        let nbytes = self.len.div_ceil(8);
        let mut emitted = 0;
        for word in &self.words {
            for b in word.to_le_bytes() {
                if emitted == nbytes {
                    break;
                }
                w.u8(b);
                emitted += 1;
            }
        }
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let len = r.len_u64()?;
        let bytes = r.take(len.div_ceil(8))?;
        let mut words = Vec::with_capacity(len.div_ceil(WORD_BITS));
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words.push(u64::from_le_bytes(buf));
        }
        if len % 8 != 0 {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return Err(Error::corrupt("non-zero padding in bit sequence"));
            }
        }
        Ok(Self::from_words(words, len))
    }

    pub fn serialized_len(&self) -> usize {
        8 + self.len.div_ceil(8)
    }
}

/// Offset of the `k`-th (1-based) set bit of `w`.
#[inline]
fn select_in_word(mut w: u64, k: usize) -> usize {
    for _ in 1..k {
        w &= w - 1;
    }
    w.trailing_zeros() as usize
}

impl fmt::Debug for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        write!(f, "BitSequence({s})")
    }
}

impl FromIterator<bool> for BitSequence {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self::from_bits(iter)
    }
}

impl std::str::FromStr for BitSequence {
    type Err = Error;

    /// Parses a string of `0`/`1` characters.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::validation(format!(
                    "invalid bit character {other:?}"
                ))),
            })
            .collect()
    }
}
