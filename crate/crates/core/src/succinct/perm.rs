use super::{BitSequence, IntVector};
use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

/// A permutation of `0..n` answering `apply` in O(1) and `inverse` by a cycle
/// walk that may take one backward shortcut.
///
/// Every cycle longer than `sample_rate` is sampled every `sample_rate` steps
/// along the cycle. Each sampled position stores a back link to the previous
/// sample of its cycle, so an inverse walk starting at `v` reaches a sample,
/// jumps back to a position not after `v`, and then walks forward onto the
/// position holding `v`. At most `sample_rate` moves are made.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortcutPermutation {
    values: IntVector,
    sampled: BitSequence,
    rev_links: IntVector,
    sample_rate: usize,
}

/// ⌈log₂ n⌉, at least 1.
pub fn default_sample_rate(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

fn check_bijection(values: &[u64]) -> Result<()> {
    let n = values.len();
    let mut seen = vec![false; n];
    for &v in values {
        let v = usize::try_from(v)
            .ok()
            .filter(|&v| v < n)
            .ok_or_else(|| Error::validation(format!("permutation value {v} outside 0..{n}")))?;
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::validation(format!("permutation value {v} repeated")));
        }
    }
    Ok(())
}

impl ShortcutPermutation {
    /// Builds with the default sample rate ⌈log₂ n⌉.
    pub fn new(values: &[u64]) -> Result<Self> {
        Self::build(values, default_sample_rate(values.len()))
    }

    pub fn build(values: &[u64], sample_rate: usize) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        check_bijection(values)?;
        let n = values.len();
        let mut visited = vec![false; n];
        let mut back: Vec<Option<u64>> = vec![None; n];
        let mut cycle = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            cycle.clear();
            let mut j = start;
            while !visited[j] {
                visited[j] = true;
                cycle.push(j);
                j = values[j] as usize;
            }
            if cycle.len() <= sample_rate {
                continue;
            }
            let samples: Vec<usize> = (0..cycle.len()).step_by(sample_rate).collect();
            for (k, &idx) in samples.iter().enumerate() {
                let prev = samples[(k + samples.len() - 1) % samples.len()];
                back[cycle[idx]] = Some(cycle[prev] as u64);
            }
        }
        let sampled = BitSequence::from_bits(back.iter().map(Option::is_some));
        let links: Vec<u64> = back.iter().flatten().copied().collect();
        Ok(Self {
            values: IntVector::from_values(values),
            sampled,
            rev_links: IntVector::from_values(&links),
            sample_rate,
        })
    }

    /// Builds from explicit shortcuts `(source, target)`; both positions must
    /// lie on the same cycle.
    pub fn with_shortcuts(
        values: &[u64],
        shortcuts: &[(usize, usize)],
        sample_rate: usize,
    ) -> Result<Self> {
        check_bijection(values)?;
        let n = values.len();
        let mut back: Vec<Option<u64>> = vec![None; n];
        for &(src, dst) in shortcuts {
            if src >= n || dst >= n {
                return Err(Error::validation(format!(
                    "shortcut {src}->{dst} out of range"
                )));
            }
            let mut j = values[src] as usize;
            while j != src && j != dst {
                j = values[j] as usize;
            }
            if j != dst {
                return Err(Error::validation(format!(
                    "shortcut {src}->{dst} leaves its cycle"
                )));
            }
            back[src] = Some(dst as u64);
        }
        Ok(Self {
            values: IntVector::from_values(values),
            sampled: BitSequence::from_bits(back.iter().map(Option::is_some)),
            rev_links: IntVector::from_values(&back.iter().flatten().copied().collect::<Vec<_>>()),
            sample_rate: sample_rate.max(1),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate(&self) -> usize {
        self.sample_rate
    }

    pub fn sampled(&self) -> &BitSequence {
        &self.sampled
    }

    pub fn shortcut_count(&self) -> usize {
        self.rev_links.len()
    }

    /// π(i).
    pub fn apply(&self, i: usize) -> Result<usize> {
        if i >= self.len() {
            return Err(Error::OutOfRange {
                pos: i as u64,
                len: self.len() as u64,
            });
        }
        Ok(self.values.get(i) as usize)
    }

    #[inline]
    fn at(&self, i: usize) -> usize {
        self.values.get(i) as usize
    }

    /// π⁻¹(v).
    pub fn inverse(&self, v: usize) -> Result<usize> {
        self.inverse_with_steps(v).map(|(p, _)| p)
    }

    /// π⁻¹(v) together with the number of moves (forward steps plus the
    /// shortcut jump) taken by the walk.
    pub fn inverse_with_steps(&self, v: usize) -> Result<(usize, usize)> {
        if v >= self.len() {
            return Err(Error::OutOfRange {
                pos: v as u64,
                len: self.len() as u64,
            });
        }
        let mut j = v;
        let mut jumped = false;
        let mut steps = 0;
        loop {
            if self.at(j) == v {
                return Ok((j, steps));
            }
            if !jumped && self.sampled.get(j) {
                jumped = true;
                j = self.rev_links.get(self.sampled.ones_before(j)) as usize;
            } else {
                j = self.at(j);
            }
            steps += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().map(|v| v as usize)
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u32(self.sample_rate as u32);
        self.values.write(w);
        self.sampled.write(w);
        self.rev_links.write(w);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let sample_rate = r.u32()? as usize;
        let values = IntVector::read(r)?;
        let sampled = BitSequence::read(r)?;
        let rev_links = IntVector::read(r)?;
        if sampled.len() != values.len() || sampled.count_ones() != rev_links.len() {
            return Err(Error::corrupt("permutation shortcut tables disagree"));
        }
        let n = values.len() as u64;
        if values.iter().any(|v| v >= n) || rev_links.iter().any(|v| v >= n) {
            return Err(Error::corrupt("permutation entry out of range"));
        }
        check_bijection(&values.iter().collect::<Vec<_>>())
            .map_err(|e| Error::corrupt(e.to_string()))?;
        Ok(Self {
            values,
            sampled,
            rev_links,
            sample_rate: sample_rate.max(1),
        })
    }

    pub fn serialized_len(&self) -> usize {
        4 + self.values.serialized_len()
            + self.sampled.serialized_len()
            + self.rev_links.serialized_len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked permutation with cycles (6,9), (11,12), (1,4,3,7,8),
    /// written 1-based, as usually drawn.
    const WORKED: [u64; 12] = [4, 2, 7, 3, 5, 9, 8, 1, 6, 10, 12, 11];

    fn worked_zero_based() -> Vec<u64> {
        WORKED.iter().map(|v| v - 1).collect()
    }

    fn naive_inverse(values: &[u64], v: usize) -> usize {
        let mut j = v;
        while values[j] as usize != v {
            j = values[j] as usize;
        }
        j
    }

    #[test]
    fn worked_apply_and_inverse() {
        // shortcut from state 3 to state 1 (1-based)
        let p = ShortcutPermutation::with_shortcuts(&worked_zero_based(), &[(2, 0)], 2).unwrap();
        assert_eq!(p.apply(5).unwrap() + 1, 9);
        assert_eq!(p.apply(3).unwrap() + 1, 3);
        for fixed in [2usize, 5, 10] {
            assert_eq!(p.apply(fixed - 1).unwrap(), fixed - 1);
        }
        // π⁻¹(3) = 4: 3 -> shortcut to 1 -> 4.
        assert_eq!(p.inverse_with_steps(2).unwrap(), (3, 2));
        // π⁻¹(4) = 1: 4 -> 3 -> shortcut to 1.
        assert_eq!(p.inverse_with_steps(3).unwrap(), (0, 2));
        for v in 0..12 {
            assert_eq!(
                p.inverse(v).unwrap(),
                naive_inverse(&worked_zero_based(), v)
            );
        }
    }

    #[test]
    fn worked_cycles_get_shortcuts() {
        let p = ShortcutPermutation::build(&worked_zero_based(), 2).unwrap();
        // only the 5-cycle exceeds the rate: samples at offsets 0, 2, 4
        assert_eq!(p.shortcut_count(), 3);
        for v in 0..12 {
            let (pos, steps) = p.inverse_with_steps(v).unwrap();
            assert_eq!(pos, naive_inverse(&worked_zero_based(), v));
            assert!(steps <= 3);
        }
    }

    #[test]
    fn identity_has_no_shortcuts() {
        let id: Vec<u64> = (0..100).collect();
        let p = ShortcutPermutation::new(&id).unwrap();
        assert_eq!(p.sampled().count_ones(), 0);
        assert_eq!(p.shortcut_count(), 0);
        assert_eq!(p.inverse(42).unwrap(), 42);
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(matches!(
            ShortcutPermutation::new(&[0, 0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            ShortcutPermutation::new(&[0, 2]),
            Err(Error::Validation(_))
        ));
        assert!(ShortcutPermutation::build(&[0], 0).is_err());
        assert!(ShortcutPermutation::with_shortcuts(&[0, 1], &[(0, 1)], 1).is_err());
    }

    #[test]
    fn out_of_range() {
        let p = ShortcutPermutation::new(&[1, 0]).unwrap();
        assert!(matches!(p.apply(2), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.inverse(2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn default_rate() {
        assert_eq!(default_sample_rate(0), 1);
        assert_eq!(default_sample_rate(2), 1);
        assert_eq!(default_sample_rate(3), 2);
        assert_eq!(default_sample_rate(1024), 10);
        assert_eq!(default_sample_rate(1025), 11);
    }

    #[test]
    fn single_long_cycle_step_bound() {
        let n = 1000usize;
        let values: Vec<u64> = (0..n).map(|i| ((i + 1) % n) as u64).collect();
        for rate in [1, 3, 10, 64] {
            let p = ShortcutPermutation::build(&values, rate).unwrap();
            for v in 0..n {
                let (pos, steps) = p.inverse_with_steps(v).unwrap();
                assert_eq!(pos, (v + n - 1) % n);
                assert!(steps <= rate + 1, "rate {rate}, v {v}: {steps} steps");
            }
        }
    }
}
