// SPDX-License-Identifier: MPL-2.0

//! Bit strings indexing nodes of the prefix tree.

use std::fmt;

/// A bit string of arbitrary length, most-significant bit first.
///
/// Used for client inputs α, tree prefixes, and candidate-set members. The
/// empty string denotes the tree root. Ordering is lexicographic with
/// `0 < 1`, which for equal lengths coincides with numeric order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        BitString(bits.to_vec())
    }

    /// The `len` most significant bits of `value`, as a bit string.
    ///
    /// `len` must be at most 64; `value` is read from bit position `len-1`
    /// downward, i.e. `from_u64(0b101, 3)` is the string `101`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "bit length {len} exceeds u64");
        BitString((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    /// Parse a hex string into exactly `len` bits (hex is left-padded with
    /// zero bits to `len`; returns `None` if the value needs more bits).
    pub fn from_hex(s: &str, len: usize) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len() * 4);
        for c in s.chars() {
            let v = c.to_digit(16)?;
            for i in (0..4).rev() {
                bits.push((v >> i) & 1 == 1);
            }
        }
        // Strip leading bits beyond len; they must be zero.
        while bits.len() > len {
            if bits.remove(0) {
                return None;
            }
        }
        while bits.len() < len {
            bits.insert(0, false);
        }
        Some(BitString(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Child node: this string with one bit appended.
    pub fn child(&self, bit: bool) -> Self {
        let mut v = self.0.clone();
        v.push(bit);
        BitString(v)
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> Self {
        BitString(self.0[..len].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// The all-ones string of length `len`.
    pub fn ones(len: usize) -> Self {
        BitString(vec![true; len])
    }

    /// Hex rendering, MSB first, left-padded to a whole number of nibbles.
    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        let pad = (4 - self.0.len() % 4) % 4;
        let mut nib = 0u32;
        let mut n = 0;
        for b in std::iter::repeat(false)
            .take(pad)
            .chain(self.0.iter().copied())
        {
            nib = (nib << 1) | b as u32;
            n += 1;
            if n == 4 {
                s.push(char::from_digit(nib, 16).unwrap());
                nib = 0;
                n = 0;
            }
        }
        s
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}
