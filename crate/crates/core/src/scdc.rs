//! Byte-oriented (s,c)-dense code.
//!
//! Byte values `[0, s)` are *stoppers* and `[s, s+c)` are *continuers*; a
//! codeword is zero or more continuers followed by exactly one stopper, so
//! decoding may start at any codeword boundary and can also step backwards
//! (the previous codeword ends at the previous stopper). There are `s·c^(j-1)`
//! codewords of length `j`; symbols are ranked by decreasing frequency and
//! rank `i` receives the `i`-th codeword in length order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScdcParams {
    s: u32,
    c: u32,
}

impl ScdcParams {
    /// Byte-oriented parameters, `c = 256 - s`.
    pub fn new(s: u32) -> Result<Self> {
        if !(1..=255).contains(&s) {
            return Err(Error::validation(format!(
                "stopper count {s} outside 1..=255"
            )));
        }
        Ok(Self { s, c: 256 - s })
    }

    /// Arbitrary radix with `s + c <= 256`; narrow alphabets are handy for
    /// inspecting codewords by hand.
    pub fn with_radix(s: u32, c: u32) -> Result<Self> {
        if s == 0 || c == 0 || s + c > 256 {
            return Err(Error::validation(format!("invalid (s,c) = ({s},{c})")));
        }
        Ok(Self { s, c })
    }

    pub fn stoppers(&self) -> u32 {
        self.s
    }

    pub fn continuers(&self) -> u32 {
        self.c
    }

    #[inline]
    pub fn is_stopper(&self, byte: u8) -> bool {
        (byte as u32) < self.s
    }

    /// Length `j` of the codeword for `rank` and `base_j`, the first rank of
    /// that length.
    #[inline]
    fn length_and_base(&self, rank: u64) -> (usize, u64) {
        let (mut base, mut count, mut len) = (0u64, self.s as u64, 1usize);
        while rank - base >= count {
            base += count;
            count = count.saturating_mul(self.c as u64);
            len += 1;
        }
        (len, base)
    }

    pub fn codeword_len(&self, rank: u64) -> usize {
        self.length_and_base(rank).0
    }

    pub fn encode_rank(&self, rank: u64, out: &mut Vec<u8>) {
        let (len, base) = self.length_and_base(rank);
        let x = rank - base;
        let start = out.len();
        out.resize(start + len, 0);
        out[start + len - 1] = (x % self.s as u64) as u8;
        let mut q = x / self.s as u64;
        for slot in out[start..start + len - 1].iter_mut().rev() {
            *slot = (self.s as u64 + q % self.c as u64) as u8;
            q /= self.c as u64;
        }
    }

    pub fn codeword(&self, rank: u64) -> Vec<u8> {
        let mut v = Vec::new();
        self.encode_rank(rank, &mut v);
        v
    }

    /// Decodes the codeword starting at `offset`, returning the rank and the
    /// offset just past the codeword.
    pub fn decode_rank(&self, bytes: &[u8], offset: usize) -> Result<(u64, usize)> {
        let (s, c) = (self.s as u128, self.c as u128);
        let mut q: u128 = 0;
        let mut base: u128 = 0;
        let mut count: u128 = s;
        let mut pos = offset;
        loop {
            let Some(&b) = bytes.get(pos) else {
                return Err(Error::corrupt(format!(
                    "codeword at byte {offset} has no stopper"
                )));
            };
            pos += 1;
            if (b as u128) < s {
                let rank = base + q * s + b as u128;
                let rank = u64::try_from(rank)
                    .map_err(|_| Error::corrupt("codeword rank overflows 64 bits"))?;
                return Ok((rank, pos));
            }
            if b as u128 >= s + c {
                return Err(Error::corrupt(format!(
                    "byte {b} is neither stopper nor continuer"
                )));
            }
            q = q * c + (b as u128 - s);
            base += count;
            count = count.saturating_mul(c);
            if base > u64::MAX as u128 {
                return Err(Error::corrupt("codeword too long"));
            }
        }
    }

    /// Start of the codeword that ends just before `end`, or `None` at the
    /// beginning of the stream.
    pub fn previous_boundary(&self, bytes: &[u8], start: usize, end: usize) -> Option<usize> {
        if end <= start {
            return None;
        }
        let mut p = end - 1;
        while p > start && !self.is_stopper(bytes[p - 1]) {
            p -= 1;
        }
        Some(p)
    }
}

/// Symbol ranks by decreasing frequency, ties by ascending symbol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyModel {
    by_rank: Vec<u64>,
    ranks: HashMap<u64, u64>,
    /// Frequencies by rank; empty for models read back from disk.
    freqs: Vec<u64>,
}

impl FrequencyModel {
    pub fn from_symbols<I: IntoIterator<Item = u64>>(symbols: I) -> Self {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for s in symbols {
            *counts.entry(s).or_default() += 1;
        }
        Self::from_counts(counts)
    }

    pub fn from_counts(counts: HashMap<u64, u64>) -> Self {
        let mut entries: Vec<(u64, u64)> = counts.into_iter().filter(|&(_, f)| f > 0).collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let by_rank: Vec<u64> = entries.iter().map(|e| e.0).collect();
        let freqs = entries.iter().map(|e| e.1).collect();
        Self::index(by_rank, freqs)
    }

    fn index(by_rank: Vec<u64>, freqs: Vec<u64>) -> Self {
        let ranks = by_rank
            .iter()
            .enumerate()
            .map(|(r, &s)| (s, r as u64))
            .collect();
        Self {
            by_rank,
            ranks,
            freqs,
        }
    }

    pub fn len(&self) -> usize {
        self.by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rank.is_empty()
    }

    pub fn rank_of(&self, symbol: u64) -> Option<u64> {
        self.ranks.get(&symbol).copied()
    }

    pub fn symbol_at(&self, rank: u64) -> Option<u64> {
        self.by_rank.get(usize::try_from(rank).ok()?).copied()
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freqs
    }

    pub fn symbols(&self) -> &[u64] {
        &self.by_rank
    }

    /// Σ freq(rank) · len(rank) for the given parameters.
    pub fn encoded_size(&self, p: ScdcParams) -> u64 {
        self.freqs
            .iter()
            .enumerate()
            .map(|(r, &f)| f * p.codeword_len(r as u64) as u64)
            .sum()
    }

    /// The byte-oriented `s` minimizing the encoded size; ties go to the
    /// smaller `s`.
    pub fn choose_optimal_s(&self) -> Result<ScdcParams> {
        if self.is_empty() {
            return Err(Error::validation(
                "cannot tune a code for an empty vocabulary",
            ));
        }
        if self.freqs.len() != self.by_rank.len() {
            return Err(Error::validation("model carries no frequencies"));
        }
        let mut prefix = Vec::with_capacity(self.freqs.len() + 1);
        prefix.push(0u64);
        for &f in &self.freqs {
            prefix.push(prefix.last().unwrap() + f);
        }
        let v = self.freqs.len() as u64;
        let mut best: Option<(u64, u32)> = None;
        for s in 1..=255u32 {
            let c = 256 - s as u64;
            let (mut base, mut count, mut len, mut total) = (0u64, s as u64, 1u64, 0u64);
            while base < v {
                let end = base.saturating_add(count).min(v);
                total += len * (prefix[end as usize] - prefix[base as usize]);
                base = end;
                count = count.saturating_mul(c);
                len += 1;
            }
            if best.is_none_or(|(t, _)| total < t) {
                best = Some((total, s));
            }
        }
        ScdcParams::new(best.unwrap().1)
    }

    pub fn encode_stream(&self, symbols: &[u64], p: ScdcParams) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(symbols.len());
        for &s in symbols {
            let rank = self.rank_of(s).ok_or(Error::UnknownSymbol(s))?;
            p.encode_rank(rank, &mut out);
        }
        Ok(out)
    }

    /// Decodes one symbol at `offset`.
    pub fn decode_symbol(
        &self,
        bytes: &[u8],
        offset: usize,
        p: ScdcParams,
    ) -> Result<(u64, usize)> {
        let (rank, next) = p.decode_rank(bytes, offset)?;
        let sym = self
            .symbol_at(rank)
            .ok_or_else(|| Error::corrupt(format!("rank {rank} beyond vocabulary")))?;
        Ok((sym, next))
    }

    /// Decodes `count` symbols starting at the codeword boundary `offset`.
    pub fn decode_stream_from(
        &self,
        bytes: &[u8],
        offset: usize,
        count: usize,
        p: ScdcParams,
    ) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(count);
        let mut pos = offset;
        for _ in 0..count {
            let (sym, next) = self.decode_symbol(bytes, pos, p)?;
            out.push(sym);
            pos = next;
        }
        Ok(out)
    }

    /// Vocabulary size, rank→symbol values, then `s`.
    pub(crate) fn write(&self, w: &mut Writer, p: ScdcParams) {
        w.u64(self.by_rank.len() as u64);
        for &s in &self.by_rank {
            w.u64(s);
        }
        w.u8(p.s as u8);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<(Self, ScdcParams)> {
        let v = r.len_u64()?;
        let mut by_rank = Vec::with_capacity(v.min(1 << 20));
        for _ in 0..v {
            by_rank.push(r.u64()?);
        }
        let p = ScdcParams::new(r.u8()? as u32).map_err(|e| Error::corrupt(e.to_string()))?;
        let model = Self::index(by_rank, Vec::new());
        if model.ranks.len() != model.by_rank.len() {
            return Err(Error::corrupt("duplicate symbol in vocabulary"));
        }
        Ok((model, p))
    }

    pub fn serialized_len(&self) -> usize {
        8 + 8 * self.by_rank.len() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScdcParams {
        ScdcParams::with_radix(2, 2).unwrap()
    }

    /// Codewords of the tiny alphabet enumerated straight from the grammar:
    /// all length-1 words, then length-2, … each in lexicographic order.
    fn grammar_enumeration(s: u8, c: u8, max_len: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut prefixes: Vec<Vec<u8>> = vec![vec![]];
        for _ in 0..max_len {
            for p in &prefixes {
                for stop in 0..s {
                    let mut w = p.clone();
                    w.push(stop);
                    out.push(w);
                }
            }
            prefixes = prefixes
                .iter()
                .flat_map(|p| {
                    (s..s + c).map(move |b| {
                        let mut w = p.clone();
                        w.push(b);
                        w
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn tiny_alphabet_codewords() {
        let p = tiny();
        assert_eq!(p.codeword(0), vec![0]);
        assert_eq!(p.codeword(1), vec![1]);
        assert_eq!(p.codeword(2), vec![2, 0]);
        assert_eq!(p.codeword(5), vec![3, 1]);
        assert_eq!(p.codeword(6), vec![2, 2, 0]);
        for (rank, word) in grammar_enumeration(2, 2, 5).iter().enumerate() {
            assert_eq!(&p.codeword(rank as u64), word);
            assert_eq!(p.decode_rank(word, 0).unwrap(), (rank as u64, word.len()));
        }
    }

    #[test]
    fn byte_oriented_lengths() {
        let p = ScdcParams::new(128).unwrap();
        assert_eq!(p.codeword_len(127), 1);
        assert_eq!(p.codeword_len(128), 2);
        assert_eq!(p.codeword_len(128 + 128 * 128 - 1), 2);
        assert_eq!(p.codeword_len(128 + 128 * 128), 3);
        let p = ScdcParams::new(255).unwrap();
        assert_eq!(p.codeword(254), vec![254]);
        assert_eq!(p.codeword(255), vec![255, 0]);
        assert_eq!(p.codeword(510), vec![255, 255, 0]);
    }

    #[test]
    fn errors() {
        assert!(ScdcParams::new(0).is_err());
        assert!(ScdcParams::new(256).is_err());
        assert!(ScdcParams::with_radix(200, 100).is_err());
        let p = ScdcParams::new(100).unwrap();
        assert!(matches!(
            p.decode_rank(&[150, 200], 0),
            Err(Error::Corrupt(_))
        ));
        assert!(matches!(p.decode_rank(&[], 0), Err(Error::Corrupt(_))));
        let m = FrequencyModel::from_symbols([1, 2]);
        assert!(matches!(
            m.encode_stream(&[3], p),
            Err(Error::UnknownSymbol(3))
        ));
        assert!(FrequencyModel::default().choose_optimal_s().is_err());
    }

    #[test]
    fn model_ranks_by_frequency_then_symbol() {
        let m = FrequencyModel::from_symbols([5, 3, 3, 9, 9, 7]);
        assert_eq!(m.symbols(), &[3, 9, 5, 7]);
        assert_eq!(m.frequencies(), &[2, 2, 1, 1]);
        assert_eq!(m.rank_of(9), Some(1));
        assert_eq!(m.rank_of(4), None);
    }

    #[test]
    fn single_symbol() {
        let m = FrequencyModel::from_symbols([42; 10]);
        let p = m.choose_optimal_s().unwrap();
        assert_eq!(p.stoppers(), 1);
        assert_eq!(m.encode_stream(&[42, 42], p).unwrap(), vec![0, 0]);
    }

    #[test]
    fn empty_stream() {
        let m = FrequencyModel::from_symbols([1]);
        let p = ScdcParams::new(10).unwrap();
        assert!(m.encode_stream(&[], p).unwrap().is_empty());
        assert!(m.decode_stream_from(&[], 0, 0, p).unwrap().is_empty());
    }

    #[test]
    fn backward_boundaries() {
        let p = ScdcParams::new(3).unwrap();
        let ranks = [0u64, 500, 2, 3, 40_000, 1];
        let mut bytes = Vec::new();
        let mut starts = Vec::new();
        for &r in &ranks {
            starts.push(bytes.len());
            p.encode_rank(r, &mut bytes);
        }
        let mut end = bytes.len();
        for (i, &r) in ranks.iter().enumerate().rev() {
            let start = p.previous_boundary(&bytes, 0, end).unwrap();
            assert_eq!(start, starts[i]);
            assert_eq!(p.decode_rank(&bytes, start).unwrap(), (r, end));
            end = start;
        }
        assert_eq!(p.previous_boundary(&bytes, 0, 0), None);
    }

    #[test]
    fn serialization() {
        let m = FrequencyModel::from_symbols([4, 4, 8, 1]);
        let p = ScdcParams::new(7).unwrap();
        let mut w = Writer::new();
        m.write(&mut w, p);
        let bytes = w.into_inner();
        assert_eq!(bytes.len(), m.serialized_len());
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &4u64.to_le_bytes());
        assert_eq!(*bytes.last().unwrap(), 7);
        let (back, bp) = FrequencyModel::read(&mut Reader::new(&bytes)).unwrap();
        assert_eq!(bp, p);
        assert_eq!(back.symbols(), m.symbols());
    }
}
