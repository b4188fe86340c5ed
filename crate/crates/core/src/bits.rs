//! Word-aligned bit vectors.
//!
//! Samples are stored as little-endian `u64` words, bit `i` of the vector in
//! bit `i % 64` of word `i / 64`. Bits past the logical width are always zero;
//! the popcount kernels depend on it.

use crate::error::{Error, Result};

#[inline]
pub const fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Mask of the valid bits in the last word of a `width`-bit vector.
#[inline]
pub const fn tail_mask(width: usize) -> u64 {
    match width % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
pub fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub fn set_bit(words: &mut [u64], i: usize, value: bool) {
    let mask = 1u64 << (i % 64);
    if value {
        words[i / 64] |= mask;
    } else {
        words[i / 64] &= !mask;
    }
}

#[inline]
pub fn popcount(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

/// Borrowed view of one packed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRef<'a> {
    words: &'a [u64],
    width: usize,
}

impl<'a> SampleRef<'a> {
    pub fn new(words: &'a [u64], width: usize) -> Result<Self> {
        if words.len() != words_for(width) {
            return Err(Error::WidthMismatch {
                expected: width,
                actual: words.len() * 64,
            });
        }
        if let Some(&last) = words.last() {
            if last & !tail_mask(width) != 0 {
                return Err(Error::Malformed("padding bits set in sample".into()));
            }
        }
        Ok(Self { words, width })
    }

    /// Skips the padding check; callers guarantee the invariant.
    #[inline]
    pub(crate) fn new_unchecked(words: &'a [u64], width: usize) -> Self {
        debug_assert_eq!(words.len(), words_for(width));
        Self { words, width }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &'a [u64] {
        self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        get_bit(self.words, i)
    }

    /// Value of literal `j` in the extended vector: `j < F` is the feature
    /// itself, `F <= j < 2F` its negation.
    #[inline]
    pub fn literal(&self, j: usize) -> bool {
        if j < self.width {
            self.get(j)
        } else {
            !self.get(j - self.width)
        }
    }

    pub fn to_owned(&self) -> BitSample {
        BitSample {
            words: self.words.to_vec(),
            width: self.width,
        }
    }
}

/// Owned packed boolean feature vector. Negated literals are derived on the
/// fly and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSample {
    words: Vec<u64>,
    width: usize,
}

impl BitSample {
    pub fn zeros(width: usize) -> Self {
        Self {
            words: vec![0; words_for(width)],
            width,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                set_bit(&mut s.words, i, true);
            }
        }
        s
    }

    pub fn from_words(words: Vec<u64>, width: usize) -> Result<Self> {
        SampleRef::new(&words, width)?;
        Ok(Self { words, width })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        get_bit(&self.words, i)
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        set_bit(&mut self.words, i, value);
    }

    pub fn count_ones(&self) -> u32 {
        popcount(&self.words)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.get(i)).collect()
    }

    #[inline]
    pub fn view(&self) -> SampleRef<'_> {
        SampleRef::new_unchecked(&self.words, self.width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_mask_widths() {
        assert_eq!(tail_mask(64), u64::MAX);
        assert_eq!(tail_mask(1), 1);
        assert_eq!(tail_mask(65), 1);
        assert_eq!(tail_mask(70), 0x3f);
    }

    #[test]
    fn from_bools_round_trip() {
        let bits: Vec<bool> = (0..130).map(|i| i % 3 == 0).collect();
        let s = BitSample::from_bools(&bits);
        assert_eq!(s.words().len(), 3);
        assert_eq!(s.to_bools(), bits);
        assert_eq!(s.count_ones(), 44);
    }

    #[test]
    fn negated_literals_are_derived() {
        let s = BitSample::from_bools(&[true, false, true]);
        let v = s.view();
        assert!(v.literal(0) && !v.literal(1) && v.literal(2));
        assert!(!v.literal(3) && v.literal(4) && !v.literal(5));
    }

    #[test]
    fn padding_bits_rejected() {
        assert!(BitSample::from_words(vec![1 << 5], 5).is_err());
        assert!(BitSample::from_words(vec![1 << 4], 5).is_ok());
        assert!(matches!(
            BitSample::from_words(vec![0, 0], 64),
            Err(Error::WidthMismatch { .. })
        ));
    }
}
