use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

/// Fixed-width packed unsigned integers.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct IntVector {
    words: Vec<u64>,
    len: usize,
    width: u8,
}

impl IntVector {
    /// Packs `values` using the narrowest width that holds the maximum.
    pub fn from_values(values: &[u64]) -> Self {
        let max = values.iter().copied().max().unwrap_or(0);
        let width = (64 - max.leading_zeros()).max(1) as u8;
        Self::with_width(values, width)
    }

    pub fn with_width(values: &[u64], width: u8) -> Self {
        assert!((1..=64).contains(&width));
        let total = values.len() * width as usize;
        let mut words = vec![0u64; total.div_ceil(64)];
        for (i, &v) in values.iter().enumerate() {
            assert!(
                width == 64 || v >> width == 0,
                "value {v} wider than {width} bits"
            );
            let bit = i * width as usize;
            let (wi, off) = (bit / 64, bit % 64);
            words[wi] |= v << off;
            if off + width as usize > 64 {
                words[wi + 1] |= v >> (64 - off);
            }
        }
        Self {
            words,
            len: values.len(),
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        assert!(i < self.len, "index {i} out of range ({})", self.len);
        let w = self.width as usize;
        let bit = i * w;
        let (wi, off) = (bit / 64, bit % 64);
        let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        let mut v = self.words[wi] >> off;
        if off + w > 64 {
            v |= self.words[wi + 1] << (64 - off);
        }
        v & mask
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u64(self.len as u64);
        w.u8(self.width);
        let nbytes = (self.len * self.width as usize).div_ceil(8);
        let bytes: Vec<u8> = self.words.iter().flat_map(|x| x.to_le_bytes()).collect();
        w.bytes(&bytes[..nbytes]);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let len = r.len_u64()?;
        let width = r.u8()?;
        if !(1..=64).contains(&width) {
            return Err(Error::corrupt(format!("integer width {width}")));
        }
        let total = len
            .checked_mul(width as usize)
            .ok_or_else(|| Error::corrupt("integer vector too large"))?;
        let bytes = r.take(total.div_ceil(8))?;
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut b = [0u8; 8];
                b[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(b)
            })
            .collect();
        Ok(Self { words, len, width })
    }

    pub fn serialized_len(&self) -> usize {
        9 + (self.len * self.width as usize).div_ceil(8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn widths() {
        assert_eq!(IntVector::from_values(&[]).width(), 1);
        assert_eq!(IntVector::from_values(&[0, 1]).width(), 1);
        assert_eq!(IntVector::from_values(&[5, 255]).width(), 8);
        let v = IntVector::from_values(&[u64::MAX, 3]);
        assert_eq!(v.get(0), u64::MAX);
        assert_eq!(v.get(1), 3);
    }

    proptest! {
        #[test]
        fn pack_roundtrip(values in proptest::collection::vec(0u64..1 << 40, 0..300)) {
            let v = IntVector::from_values(&values);
            prop_assert_eq!(v.iter().collect::<Vec<_>>(), values.clone());
            let mut w = Writer::new();
            v.write(&mut w);
            let bytes = w.into_inner();
            prop_assert_eq!(bytes.len(), v.serialized_len());
            prop_assert_eq!(IntVector::read(&mut Reader::new(&bytes)).unwrap(), v);
        }
    }
}
