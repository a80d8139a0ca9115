// SPDX-License-Identifier: MPL-2.0

//! Fixed-width prime-field arithmetic.
//!
//! Three fields are provided:
//!
//! * [`Field62`] — modulus `2^62 - 57`, the largest prime below `2^62`. Used
//!   at the inner levels of the prefix tree. Wire encoding: 8 bytes.
//! * [`Field255`] — modulus `2^255 - 19`. Used at the leaves. Wire encoding:
//!   32 bytes.
//! * [`FieldTest`] — modulus `65537`. A small field for statistical tests and
//!   exhaustive oracles; never used on the wire by the production protocols.
//!
//! Elements are always canonically reduced. Cross-field arithmetic is ruled
//! out at the type level. All encodings are fixed-length little-endian.
//! `add`/`sub`/`mul` avoid secret-dependent branches (best effort, documented
//! rather than audited); inversion runs a fixed public exponentiation ladder.

use crate::codec::CodecError;
use rand::RngCore;
use std::fmt::Debug;

/// A prime field element type.
pub trait PrimeField:
    'static + Copy + Clone + Debug + PartialEq + Eq + Send + Sync + Default
{
    /// ⌈log2 p⌉.
    const BITS: u32;
    /// Wire encoding width, ⌈BITS/8⌉ octets.
    const BYTES: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn neg(self) -> Self;
    fn mul(self, other: Self) -> Self;
    /// Multiplicative inverse; `None` for zero.
    fn inv(self) -> Option<Self>;
    fn from_u64(v: u64) -> Self;
    /// The canonical residue as a u64, if it fits.
    fn to_u64(self) -> Option<u64>;

    /// Interpret a little-endian byte string as an unsigned integer reduced
    /// mod p. Deterministic for any input length. For outputs statistically
    /// close to uniform, feed at least `BITS + 64` bits of uniform input.
    fn from_wide_bytes(bytes: &[u8]) -> Self;

    /// Fixed-length little-endian canonical encoding.
    fn encode(self, out: &mut Vec<u8>);
    /// Decode exactly `BYTES` octets; rejects non-canonical values.
    fn decode(bytes: &[u8]) -> Result<Self, CodecError>;

    /// Uniform element from an RNG (rejection-free: wide reduction).
    fn random(rng: &mut dyn RngCore) -> Self {
        let mut buf = vec![0u8; Self::BYTES + 8];
        rng.fill_bytes(&mut buf);
        Self::from_wide_bytes(&buf)
    }

    fn pow_u64(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }
}

/// Branchless select: `a` if `sel == 0`, `b` if `sel == u64::MAX`.
#[inline(always)]
fn select_u64(sel: u64, a: u64, b: u64) -> u64 {
    (a & !sel) | (b & sel)
}

// ---------------------------------------------------------------------------
// Field62: p = 2^62 - 57
// ---------------------------------------------------------------------------

/// Modulus of [`Field62`].
pub const P62: u64 = (1u64 << 62) - 57;
const MASK62: u64 = (1u64 << 62) - 1;

/// Element of the 62-bit inner field, modulus `2^62 - 57`.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Field62(u64);

impl Field62 {
    pub const fn new_reduced(v: u64) -> Self {
        Field62(v % P62)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Reduce a value < 2^124 using 2^62 ≡ 57 (mod p).
    #[inline(always)]
    fn reduce_wide(x: u128) -> u64 {
        let y = 57 * (x >> 62) + (x & MASK62 as u128);
        let z = (57 * (y >> 62) + (y & MASK62 as u128)) as u64;
        let ge = ((P62.wrapping_sub(1).wrapping_sub(z) as i64) >> 63) as u64; // all-ones if z >= p
        select_u64(ge, z, z.wrapping_sub(P62))
    }
}

impl Debug for Field62 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F62({})", self.0)
    }
}

impl PrimeField for Field62 {
    const BITS: u32 = 62;
    const BYTES: usize = 8;

    fn zero() -> Self {
        Field62(0)
    }

    fn one() -> Self {
        Field62(1)
    }

    #[inline(always)]
    fn add(self, other: Self) -> Self {
        let t = self.0 + other.0; // < 2^63, no overflow
        let ge = ((P62.wrapping_sub(1).wrapping_sub(t) as i64) >> 63) as u64;
        Field62(select_u64(ge, t, t.wrapping_sub(P62)))
    }

    #[inline(always)]
    fn sub(self, other: Self) -> Self {
        let (t, borrow) = self.0.overflowing_sub(other.0);
        let mask = (borrow as u64).wrapping_neg();
        Field62(t.wrapping_add(P62 & mask))
    }

    #[inline(always)]
    fn neg(self) -> Self {
        Self::zero().sub(self)
    }

    #[inline(always)]
    fn mul(self, other: Self) -> Self {
        Field62(Self::reduce_wide(self.0 as u128 * other.0 as u128))
    }

    fn inv(self) -> Option<Self> {
        if self.0 == 0 {
            return None;
        }
        Some(self.pow_u64(P62 - 2))
    }

    fn from_u64(v: u64) -> Self {
        Field62(v % P62)
    }

    fn to_u64(self) -> Option<u64> {
        Some(self.0)
    }

    fn from_wide_bytes(bytes: &[u8]) -> Self {
        let mut acc = 0u64;
        for chunk in le_chunks_msb_first(bytes) {
            acc = (((acc as u128) << 64 | chunk as u128) % P62 as u128) as u64;
        }
        Field62(acc)
    }

    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0.to_le_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != 8 {
            return Err(CodecError::Truncated);
        }
        let mut a = [0u8; 8];
        a.copy_from_slice(bytes);
        let v = u64::from_le_bytes(a);
        if v >= P62 {
            return Err(CodecError::Invalid("field element not canonical"));
        }
        Ok(Field62(v))
    }
}

/// Iterate 8-byte little-endian chunks of `bytes`, most significant first.
fn le_chunks_msb_first(bytes: &[u8]) -> impl Iterator<Item = u64> + '_ {
    let n = bytes.len().div_ceil(8);
    (0..n).rev().map(move |i| {
        let lo = i * 8;
        let hi = ((i + 1) * 8).min(bytes.len());
        let mut a = [0u8; 8];
        a[..hi - lo].copy_from_slice(&bytes[lo..hi]);
        u64::from_le_bytes(a)
    })
}

// ---------------------------------------------------------------------------
// Field255: p = 2^255 - 19
// ---------------------------------------------------------------------------

/// Little-endian limbs of the [`Field255`] modulus `2^255 - 19`.
pub const P255: [u64; 4] = [
    0xffff_ffff_ffff_ffed,
    0xffff_ffff_ffff_ffff,
    0xffff_ffff_ffff_ffff,
    0x7fff_ffff_ffff_ffff,
];

/// Element of the 255-bit leaf field, modulus `2^255 - 19`. Four 64-bit
/// little-endian limbs, canonically reduced.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Field255([u64; 4]);

#[inline(always)]
fn adc(a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + b as u128 + carry as u128;
    (t as u64, (t >> 64) as u64)
}

#[inline(always)]
fn sbb(a: u64, b: u64, borrow: u64) -> (u64, u64) {
    let t = (a as u128).wrapping_sub(b as u128 + borrow as u128);
    (t as u64, (t >> 127) as u64)
}

impl Field255 {
    pub const fn from_limbs_unchecked(limbs: [u64; 4]) -> Self {
        Field255(limbs)
    }

    pub fn limbs(self) -> [u64; 4] {
        self.0
    }

    /// `a - p`, plus a flag (all-ones mask) meaning "a < p".
    #[inline(always)]
    fn sub_p(a: &[u64; 4]) -> ([u64; 4], u64) {
        let mut out = [0u64; 4];
        let mut borrow = 0u64;
        for i in 0..4 {
            let (v, b) = sbb(a[i], P255[i], borrow);
            out[i] = v;
            borrow = b;
        }
        (out, borrow.wrapping_neg())
    }

    /// Conditionally subtract p so the result is canonical (input < 2p).
    #[inline(always)]
    fn normalize(a: [u64; 4]) -> [u64; 4] {
        let (sub, lt) = Self::sub_p(&a);
        let mut out = [0u64; 4];
        for i in 0..4 {
            out[i] = select_u64(lt, sub[i], a[i]);
        }
        out
    }

    /// Reduce an 8-limb product using 2^256 ≡ 38 (mod p).
    fn reduce_512(r: [u64; 8]) -> Self {
        // Fold the high half with weight 38.
        let mut t = [0u64; 4];
        let mut carry: u128 = 0;
        for i in 0..4 {
            let v = r[i] as u128 + 38u128 * r[i + 4] as u128 + carry;
            t[i] = v as u64;
            carry = v >> 64;
        }
        // carry < 2^7; fold twice more, which provably clears it.
        for _ in 0..2 {
            let mut c: u128 = carry * 38;
            for limb in t.iter_mut() {
                let v = *limb as u128 + c;
                *limb = v as u64;
                c = v >> 64;
            }
            carry = c;
        }
        debug_assert_eq!(carry, 0);
        // t < 2^256 ≤ 2p + 38: at most two conditional subtractions.
        Field255(Self::normalize(Self::normalize(t)))
    }

    fn mul_limbs(a: &[u64; 4], b: &[u64; 4]) -> [u64; 8] {
        let mut r = [0u64; 8];
        for i in 0..4 {
            let mut carry: u128 = 0;
            for j in 0..4 {
                let v = r[i + j] as u128 + a[i] as u128 * b[j] as u128 + carry;
                r[i + j] = v as u64;
                carry = v >> 64;
            }
            r[i + 4] = carry as u64;
        }
        r
    }

    fn pow_limbs(self, e: &[u64; 4]) -> Self {
        // Public exponent; MSB-first square-and-multiply.
        let mut acc = Self::one();
        for i in (0..256).rev() {
            acc = acc.mul(acc);
            if (e[i / 64] >> (i % 64)) & 1 == 1 {
                acc = acc.mul(self);
            }
        }
        acc
    }
}

impl Debug for Field255 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "F255({:016x}{:016x}{:016x}{:016x})",
            self.0[3], self.0[2], self.0[1], self.0[0]
        )
    }
}

impl PrimeField for Field255 {
    const BITS: u32 = 255;
    const BYTES: usize = 32;

    fn zero() -> Self {
        Field255([0; 4])
    }

    fn one() -> Self {
        Field255([1, 0, 0, 0])
    }

    #[inline]
    fn add(self, other: Self) -> Self {
        let mut t = [0u64; 4];
        let mut carry = 0u64;
        for i in 0..4 {
            let (v, c) = adc(self.0[i], other.0[i], carry);
            t[i] = v;
            carry = c;
        }
        debug_assert_eq!(carry, 0); // a + b ≤ 2p - 2 < 2^256
        Field255(Self::normalize(t))
    }

    #[inline]
    fn sub(self, other: Self) -> Self {
        let mut t = [0u64; 4];
        let mut borrow = 0u64;
        for i in 0..4 {
            let (v, b) = sbb(self.0[i], other.0[i], borrow);
            t[i] = v;
            borrow = b;
        }
        // If we borrowed, add p back.
        let mask = borrow.wrapping_neg();
        let mut carry = 0u64;
        for i in 0..4 {
            let (v, c) = adc(t[i], P255[i] & mask, carry);
            t[i] = v;
            carry = c;
        }
        Field255(t)
    }

    fn neg(self) -> Self {
        Self::zero().sub(self)
    }

    #[inline]
    fn mul(self, other: Self) -> Self {
        Self::reduce_512(Self::mul_limbs(&self.0, &other.0))
    }

    fn inv(self) -> Option<Self> {
        if self == Self::zero() {
            return None;
        }
        // p - 2
        let e = [
            0xffff_ffff_ffff_ffeb,
            0xffff_ffff_ffff_ffff,
            0xffff_ffff_ffff_ffff,
            0x7fff_ffff_ffff_ffff,
        ];
        Some(self.pow_limbs(&e))
    }

    fn from_u64(v: u64) -> Self {
        Field255([v, 0, 0, 0])
    }

    fn to_u64(self) -> Option<u64> {
        if self.0[1] == 0 && self.0[2] == 0 && self.0[3] == 0 {
            Some(self.0[0])
        } else {
            None
        }
    }

    fn from_wide_bytes(bytes: &[u8]) -> Self {
        let two64 = Field255([0, 1, 0, 0]);
        let mut acc = Self::zero();
        for chunk in le_chunks_msb_first(bytes) {
            acc = acc.mul(two64).add(Self::from_u64(chunk));
        }
        acc
    }

    fn encode(self, out: &mut Vec<u8>) {
        for limb in self.0 {
            out.extend_from_slice(&limb.to_le_bytes());
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != 32 {
            return Err(CodecError::Truncated);
        }
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let mut a = [0u8; 8];
            a.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            *limb = u64::from_le_bytes(a);
        }
        let (_, lt) = Self::sub_p(&limbs);
        if lt == 0 {
            return Err(CodecError::Invalid("field element not canonical"));
        }
        Ok(Field255(limbs))
    }
}

// ---------------------------------------------------------------------------
// FieldTest: p = 65537
// ---------------------------------------------------------------------------

/// Modulus of [`FieldTest`].
pub const PTEST: u64 = 65537;

/// Element of the small test field, modulus `65537`. Three-octet encoding.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct FieldTest(u64);

impl FieldTest {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl Debug for FieldTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FT({})", self.0)
    }
}

impl PrimeField for FieldTest {
    const BITS: u32 = 17;
    const BYTES: usize = 3;

    fn zero() -> Self {
        FieldTest(0)
    }

    fn one() -> Self {
        FieldTest(1)
    }

    fn add(self, other: Self) -> Self {
        FieldTest((self.0 + other.0) % PTEST)
    }

    fn sub(self, other: Self) -> Self {
        FieldTest((self.0 + PTEST - other.0) % PTEST)
    }

    fn neg(self) -> Self {
        FieldTest((PTEST - self.0) % PTEST)
    }

    fn mul(self, other: Self) -> Self {
        FieldTest((self.0 * other.0) % PTEST)
    }

    fn inv(self) -> Option<Self> {
        if self.0 == 0 {
            return None;
        }
        Some(self.pow_u64(PTEST - 2))
    }

    fn from_u64(v: u64) -> Self {
        FieldTest(v % PTEST)
    }

    fn to_u64(self) -> Option<u64> {
        Some(self.0)
    }

    fn from_wide_bytes(bytes: &[u8]) -> Self {
        let mut acc = 0u64;
        for chunk in le_chunks_msb_first(bytes) {
            acc = (((acc as u128) << 64 | chunk as u128) % PTEST as u128) as u64;
        }
        FieldTest(acc)
    }

    fn encode(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0.to_le_bytes()[..3]);
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != 3 {
            return Err(CodecError::Truncated);
        }
        let v = bytes[0] as u64 | (bytes[1] as u64) << 8 | (bytes[2] as u64) << 16;
        if v >= PTEST {
            return Err(CodecError::Invalid("field element not canonical"));
        }
        Ok(FieldTest(v))
    }
}
