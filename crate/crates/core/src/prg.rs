// SPDX-License-Identifier: MPL-2.0

//! Length-doubling PRG and seed-to-group conversion stream.
//!
//! The PRG `G: {0,1}^λ → {0,1}^{2λ+2}` (λ = 127) is built from AES-128 with a
//! fixed all-zero key in a Matyas–Meyer–Oseas compression mode: each output
//! half is `E_K(x) ⊕ x`, where the left half uses the seed block as-is and the
//! right half uses the seed block with its top bit set. Seed blocks always
//! carry a zero top bit, so the two halves read from disjoint cipher inputs.
//! From each half, the low bit becomes the control bit `t` and the remaining
//! 127 bits (shifted down, top bit zero) become the next seed.
//!
//! [`Prg`] abstracts the oracle so tests can swap in [`RecordingPrg`], which
//! logs every queried seed and counts underlying cipher-pair evaluations.
//! Production code uses the zero-overhead [`FixedKeyPrg`].

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::RngCore;
use std::sync::OnceLock;

/// λ: effective PRG seed bits, stored in a 16-octet block with zero top bit.
pub const LAMBDA: u32 = 127;

/// One 32-byte output of the length-doubling PRG (one "PRG call" in all cost
/// accounting; two fixed-key AES invocations).
pub const PRG_BLOCK_BYTES: usize = 32;

/// A PRG seed: 128-bit block whose top bit (bit 7 of the last octet, i.e. bit
/// 127 of the little-endian integer) is always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed([u8; 16]);

impl Seed {
    /// Wrap a block, forcing the top bit to zero.
    pub fn from_block(mut block: [u8; 16]) -> Self {
        block[15] &= 0x7f;
        Seed(block)
    }

    pub fn from_rng(rng: &mut dyn RngCore) -> Self {
        let mut block = [0u8; 16];
        rng.fill_bytes(&mut block);
        Self::from_block(block)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn xor(&self, other: &Seed) -> Seed {
        let mut out = [0u8; 16];
        for i in 0..16 {
            out[i] = self.0[i] ^ other.0[i];
        }
        Seed(out) // top bits both zero, so the xor's is too
    }

    pub fn top_bit_clear(&self) -> bool {
        self.0[15] & 0x80 == 0
    }

    fn with_low_xor(&self, v: u8) -> [u8; 16] {
        let mut b = self.0;
        b[0] ^= v;
        b
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.0.iter().rev() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Output of one PRG expansion: two (seed, bit) halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrgOutput {
    pub s_left: Seed,
    pub t_left: bool,
    pub s_right: Seed,
    pub t_right: bool,
}

/// Parse a 16-byte half into (seed, t): t is the low bit, the remaining 127
/// bits shift down into a top-bit-zero seed block.
fn parse_half(block: &[u8]) -> (Seed, bool) {
    let mut a = [0u8; 16];
    a.copy_from_slice(block);
    let v = u128::from_le_bytes(a);
    (Seed((v >> 1).to_le_bytes()), v & 1 == 1)
}

/// The PRG oracle interface used by key generation and evaluation.
pub trait Prg {
    /// One length-doubling expansion (one PRG call).
    fn expand(&self, s: &Seed) -> PrgOutput;

    /// Fill `out` with the conversion stream for `s`. `out.len()` must be a
    /// multiple of 32; each 32-byte block costs one PRG call, on the inputs
    /// `s ^ 0, s ^ 1, …` (low-byte counter), so the queried seed itself is
    /// the stream's first oracle input.
    fn convert_fill(&self, s: &Seed, out: &mut [u8]);
}

fn fixed_cipher() -> &'static Aes128 {
    static CIPHER: OnceLock<Aes128> = OnceLock::new();
    CIPHER.get_or_init(|| Aes128::new(&[0u8; 16].into()))
}

/// Production PRG: stateless, thread-safe, no instrumentation.
#[derive(Clone, Copy, Default)]
pub struct FixedKeyPrg;

impl FixedKeyPrg {
    /// E_K(x) ⊕ x for the block and its top-bit-set twin: 32 raw bytes.
    fn raw_block(x: [u8; 16]) -> [u8; 32] {
        let cipher = fixed_cipher();
        let mut twin = x;
        twin[15] |= 0x80;
        let mut b0 = x.into();
        let mut b1 = twin.into();
        cipher.encrypt_block(&mut b0);
        cipher.encrypt_block(&mut b1);
        let mut out = [0u8; 32];
        for i in 0..16 {
            out[i] = b0[i] ^ x[i];
            out[16 + i] = b1[i] ^ twin[i];
        }
        out
    }
}

impl Prg for FixedKeyPrg {
    fn expand(&self, s: &Seed) -> PrgOutput {
        let raw = Self::raw_block(s.0);
        let (s_left, t_left) = parse_half(&raw[..16]);
        let (s_right, t_right) = parse_half(&raw[16..]);
        PrgOutput {
            s_left,
            t_left,
            s_right,
            t_right,
        }
    }

    fn convert_fill(&self, s: &Seed, out: &mut [u8]) {
        assert!(out.len() % PRG_BLOCK_BYTES == 0);
        for (j, chunk) in out.chunks_mut(PRG_BLOCK_BYTES).enumerate() {
            chunk.copy_from_slice(&Self::raw_block(s.with_low_xor(j as u8)));
        }
    }
}

/// Keyed deterministic expansion: AES-128 keyed by a seed, used for
/// correlated-randomness streams (the sketch vector r̄ and the a,b,c masks).
/// Distinct `(tag, index)` pairs give independent-looking blocks.
pub struct KeyedPrf {
    cipher: Aes128,
}

impl KeyedPrf {
    pub fn new(seed: &Seed) -> Self {
        KeyedPrf {
            cipher: Aes128::new(seed.as_bytes().into()),
        }
    }

    /// One 16-octet block for (tag, index). `tag` is at most 8 octets.
    pub fn block(&self, tag: &[u8], index: u64) -> [u8; 16] {
        assert!(tag.len() <= 8, "prf tag too long");
        let mut b = [0u8; 16];
        b[..tag.len()].copy_from_slice(tag);
        b[8..].copy_from_slice(&index.to_le_bytes());
        let mut blk = b.into();
        self.cipher.encrypt_block(&mut blk);
        blk.into()
    }

    /// A field element from `index`, using as many consecutive blocks as the
    /// field needs for `BITS + 64` input bits of wide reduction.
    pub fn field<F: crate::field::PrimeField>(&self, tag: &[u8], index: u64) -> F {
        let blocks = (F::BITS as usize + 64).div_ceil(128);
        let mut buf = vec![0u8; blocks * 16];
        for j in 0..blocks {
            let b = self.block(tag, index * blocks as u64 + j as u64);
            buf[j * 16..(j + 1) * 16].copy_from_slice(&b);
        }
        F::from_wide_bytes(&buf)
    }

    /// A derived seed for (tag, index).
    pub fn subseed(&self, tag: &[u8], index: u64) -> Seed {
        Seed::from_block(self.block(tag, index))
    }
}

/// One-shot convenience for [`KeyedPrf::block`].
pub fn prf_stream(seed: &Seed, tag: &[u8], index: u64) -> [u8; 16] {
    KeyedPrf::new(seed).block(tag, index)
}

#[cfg(feature = "harness")]
pub use recording::{OracleTranscript, RecordingPrg};

#[cfg(feature = "harness")]
mod recording {
    use super::*;
    use std::cell::RefCell;
    use std::collections::HashSet;

    /// Ordered log of oracle inputs plus a call counter. Append-only within
    /// one protocol run; single-threaded by construction.
    #[derive(Default)]
    pub struct OracleTranscript {
        queries: Vec<Seed>,
        present: HashSet<[u8; 16]>,
    }

    impl OracleTranscript {
        pub fn contains(&self, s: &Seed) -> bool {
            self.present.contains(s.as_bytes())
        }

        pub fn calls(&self) -> u64 {
            self.queries.len() as u64
        }

        pub fn queries(&self) -> &[Seed] {
            &self.queries
        }

        fn record(&mut self, s: Seed) {
            self.present.insert(*s.as_bytes());
            self.queries.push(s);
        }
    }

    /// Oracle wrapper that records every queried seed. Not `Sync`; confine
    /// each instance to one thread.
    #[derive(Default)]
    pub struct RecordingPrg {
        inner: FixedKeyPrg,
        log: RefCell<OracleTranscript>,
    }

    impl RecordingPrg {
        pub fn new() -> Self {
            Self::default()
        }

        pub fn calls(&self) -> u64 {
            self.log.borrow().calls()
        }

        pub fn reset(&self) {
            *self.log.borrow_mut() = OracleTranscript::default();
        }

        /// Hand the transcript over, leaving an empty one behind.
        pub fn take_transcript(&self) -> OracleTranscript {
            self.log.take()
        }

        pub fn with_transcript<R>(&self, f: impl FnOnce(&OracleTranscript) -> R) -> R {
            f(&self.log.borrow())
        }
    }

    impl Prg for RecordingPrg {
        fn expand(&self, s: &Seed) -> PrgOutput {
            self.log.borrow_mut().record(*s);
            self.inner.expand(s)
        }

        fn convert_fill(&self, s: &Seed, out: &mut [u8]) {
            let mut log = self.log.borrow_mut();
            for j in 0..out.len() / PRG_BLOCK_BYTES {
                log.record(Seed(s.with_low_xor(j as u8)));
            }
            drop(log);
            self.inner.convert_fill(s, out);
        }
    }
}
