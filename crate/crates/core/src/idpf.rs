// SPDX-License-Identifier: MPL-2.0

//! Incremental distributed point functions.
//!
//! A key pair generated for `(α, β_1..β_n)` secret-shares the labels on the
//! nodes of a depth-`n` binary tree that is zero everywhere except on the
//! root-to-leaf path to `α`, where the level-ℓ node carries `β_ℓ`. The two
//! parties evaluate one input bit at a time ([`eval_next`]) or along a whole
//! prefix ([`eval_prefix`]); their outputs are additive shares in the level's
//! payload group.
//!
//! Plain DPFs are the special case of trivial intermediate groups: only the
//! final level carries a payload, and intermediate levels cost exactly one
//! PRG call.
//!
//! # Wire formats (frozen)
//!
//! Key: `[version=1][flags (bit0 = party)][root seed, 16 octets]` — 18 octets.
//!
//! Public parameters:
//! `[version=1][lambda=127][n, u16 LE][n group codes]` followed per level by
//! `[seed correction, 16 octets][flags (bit0 = t_left, bit1 = t_right)]
//! [payload correction, fixed width per group]`. Field encodings are
//! little-endian. The flags octet spends 8 bits on 2; size accounting
//! subtracts this padding explicitly (see [`serialization_overhead_bits`]).

use crate::bits::BitString;
use crate::codec::{put_u16, CodecError, Reader};
use crate::field::{Field255, Field62, FieldTest, PrimeField};
use crate::prg::{Prg, Seed, LAMBDA, PRG_BLOCK_BYTES};
use rand::RngCore;

/// Payload group descriptor for one tree level. The vocabulary is closed so
/// the serialization format stays bounded.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum GroupDesc {
    /// No payload at this level (plain-DPF intermediate level).
    Trivial,
    /// One 62-bit-field element.
    Inner,
    /// A pair of 62-bit-field elements (value, authenticator).
    InnerPair,
    /// One 255-bit-field element.
    Leaf,
    /// A pair of 255-bit-field elements.
    LeafPair,
    /// One test-field element.
    Test,
    /// A pair of test-field elements.
    TestPair,
}

impl GroupDesc {
    pub const ALL: [GroupDesc; 7] = [
        GroupDesc::Trivial,
        GroupDesc::Inner,
        GroupDesc::InnerPair,
        GroupDesc::Leaf,
        GroupDesc::LeafPair,
        GroupDesc::Test,
        GroupDesc::TestPair,
    ];

    /// ⌈log2 |𝔾|⌉.
    pub fn bits(self) -> u32 {
        match self {
            GroupDesc::Trivial => 0,
            GroupDesc::Inner => Field62::BITS,
            GroupDesc::InnerPair => 2 * Field62::BITS,
            GroupDesc::Leaf => Field255::BITS,
            GroupDesc::LeafPair => 2 * Field255::BITS,
            GroupDesc::Test => FieldTest::BITS,
            GroupDesc::TestPair => 2 * FieldTest::BITS - 1, // ⌈log2 p²⌉ = 33
        }
    }

    /// Serialized payload width in octets.
    pub fn encoded_bytes(self) -> usize {
        match self {
            GroupDesc::Trivial => 0,
            GroupDesc::Inner => Field62::BYTES,
            GroupDesc::InnerPair => 2 * Field62::BYTES,
            GroupDesc::Leaf => Field255::BYTES,
            GroupDesc::LeafPair => 2 * Field255::BYTES,
            GroupDesc::Test => FieldTest::BYTES,
            GroupDesc::TestPair => 2 * FieldTest::BYTES,
        }
    }

    /// PRG calls spent by the seed-to-group conversion: ⌈bits/λ⌉.
    pub fn convert_calls(self) -> usize {
        (self.bits() as usize).div_ceil(LAMBDA as usize)
    }

    /// Total PRG calls for one level of evaluation: 1 + ⌈bits/λ⌉.
    pub fn cost(self) -> usize {
        1 + self.convert_calls()
    }

    pub fn code(self) -> u8 {
        match self {
            GroupDesc::Trivial => 0,
            GroupDesc::Inner => 1,
            GroupDesc::InnerPair => 2,
            GroupDesc::Leaf => 3,
            GroupDesc::LeafPair => 4,
            GroupDesc::Test => 5,
            GroupDesc::TestPair => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        GroupDesc::ALL.into_iter().find(|d| d.code() == code)
    }
}

/// A value in one of the per-level payload groups. Arithmetic between values
/// of different groups is a programming error and panics.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GroupValue {
    Trivial,
    Inner(Field62),
    InnerPair(Field62, Field62),
    Leaf(Field255),
    LeafPair(Field255, Field255),
    Test(FieldTest),
    TestPair(FieldTest, FieldTest),
}

impl GroupValue {
    pub fn zero(desc: GroupDesc) -> Self {
        match desc {
            GroupDesc::Trivial => GroupValue::Trivial,
            GroupDesc::Inner => GroupValue::Inner(Field62::zero()),
            GroupDesc::InnerPair => GroupValue::InnerPair(Field62::zero(), Field62::zero()),
            GroupDesc::Leaf => GroupValue::Leaf(Field255::zero()),
            GroupDesc::LeafPair => GroupValue::LeafPair(Field255::zero(), Field255::zero()),
            GroupDesc::Test => GroupValue::Test(FieldTest::zero()),
            GroupDesc::TestPair => GroupValue::TestPair(FieldTest::zero(), FieldTest::zero()),
        }
    }

    pub fn desc(&self) -> GroupDesc {
        match self {
            GroupValue::Trivial => GroupDesc::Trivial,
            GroupValue::Inner(_) => GroupDesc::Inner,
            GroupValue::InnerPair(..) => GroupDesc::InnerPair,
            GroupValue::Leaf(_) => GroupDesc::Leaf,
            GroupValue::LeafPair(..) => GroupDesc::LeafPair,
            GroupValue::Test(_) => GroupDesc::Test,
            GroupValue::TestPair(..) => GroupDesc::TestPair,
        }
    }

    pub fn add(self, other: Self) -> Self {
        use GroupValue::*;
        match (self, other) {
            (Trivial, Trivial) => Trivial,
            (Inner(a), Inner(b)) => Inner(a.add(b)),
            (InnerPair(a, b), InnerPair(c, d)) => InnerPair(a.add(c), b.add(d)),
            (Leaf(a), Leaf(b)) => Leaf(a.add(b)),
            (LeafPair(a, b), LeafPair(c, d)) => LeafPair(a.add(c), b.add(d)),
            (Test(a), Test(b)) => Test(a.add(b)),
            (TestPair(a, b), TestPair(c, d)) => TestPair(a.add(c), b.add(d)),
            (a, b) => panic!("group mismatch: {:?} + {:?}", a.desc(), b.desc()),
        }
    }

    pub fn neg(self) -> Self {
        use GroupValue::*;
        match self {
            Trivial => Trivial,
            Inner(a) => Inner(a.neg()),
            InnerPair(a, b) => InnerPair(a.neg(), b.neg()),
            Leaf(a) => Leaf(a.neg()),
            LeafPair(a, b) => LeafPair(a.neg(), b.neg()),
            Test(a) => Test(a.neg()),
            TestPair(a, b) => TestPair(a.neg(), b.neg()),
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn is_zero(&self) -> bool {
        *self == GroupValue::zero(self.desc())
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        use GroupValue::*;
        match self {
            Trivial => {}
            Inner(a) => a.encode(out),
            InnerPair(a, b) => {
                a.encode(out);
                b.encode(out);
            }
            Leaf(a) => a.encode(out),
            LeafPair(a, b) => {
                a.encode(out);
                b.encode(out);
            }
            Test(a) => a.encode(out),
            TestPair(a, b) => {
                a.encode(out);
                b.encode(out);
            }
        }
    }

    pub fn decode(desc: GroupDesc, r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(match desc {
            GroupDesc::Trivial => GroupValue::Trivial,
            GroupDesc::Inner => GroupValue::Inner(Field62::decode(r.take(Field62::BYTES)?)?),
            GroupDesc::InnerPair => GroupValue::InnerPair(
                Field62::decode(r.take(Field62::BYTES)?)?,
                Field62::decode(r.take(Field62::BYTES)?)?,
            ),
            GroupDesc::Leaf => GroupValue::Leaf(Field255::decode(r.take(Field255::BYTES)?)?),
            GroupDesc::LeafPair => GroupValue::LeafPair(
                Field255::decode(r.take(Field255::BYTES)?)?,
                Field255::decode(r.take(Field255::BYTES)?)?,
            ),
            GroupDesc::Test => GroupValue::Test(FieldTest::decode(r.take(FieldTest::BYTES)?)?),
            GroupDesc::TestPair => GroupValue::TestPair(
                FieldTest::decode(r.take(FieldTest::BYTES)?)?,
                FieldTest::decode(r.take(FieldTest::BYTES)?)?,
            ),
        })
    }
}

/// Seed-to-group conversion: expands `s` into the next-level seed and a
/// pseudorandom payload-group element, from disjoint output bytes. Trivial
/// groups pass the seed through at zero PRG cost.
fn convert(desc: GroupDesc, s: &Seed, prg: &impl Prg) -> (Seed, GroupValue) {
    let calls = desc.convert_calls();
    if calls == 0 {
        return (*s, GroupValue::Trivial);
    }
    let mut buf = [0u8; 5 * PRG_BLOCK_BYTES];
    let buf = &mut buf[..calls * PRG_BLOCK_BYTES];
    prg.convert_fill(s, buf);
    let mut block0 = [0u8; 16];
    block0.copy_from_slice(&buf[..16]);
    let next = Seed::from_block(block0);
    let value = match desc {
        GroupDesc::Trivial => unreachable!(),
        GroupDesc::Inner => GroupValue::Inner(Field62::from_wide_bytes(&buf[16..32])),
        GroupDesc::InnerPair => GroupValue::InnerPair(
            Field62::from_wide_bytes(&buf[16..24]),
            Field62::from_wide_bytes(&buf[24..32]),
        ),
        GroupDesc::Leaf => GroupValue::Leaf(Field255::from_wide_bytes(&buf[16..56])),
        GroupDesc::LeafPair => GroupValue::LeafPair(
            Field255::from_wide_bytes(&buf[16..56]),
            Field255::from_wide_bytes(&buf[56..96]),
        ),
        GroupDesc::Test => GroupValue::Test(FieldTest::from_wide_bytes(&buf[16..32])),
        GroupDesc::TestPair => GroupValue::TestPair(
            FieldTest::from_wide_bytes(&buf[16..24]),
            FieldTest::from_wide_bytes(&buf[24..32]),
        ),
    };
    (next, value)
}

/// Per-level public correction values.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CorrectionWord {
    pub seed: Seed,
    pub t_left: bool,
    pub t_right: bool,
    pub payload: GroupValue,
}

/// The shared public part of a key pair: one correction word per level plus
/// the level group descriptors. Both servers must hold identical bytes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PublicParams {
    pub groups: Vec<GroupDesc>,
    pub levels: Vec<CorrectionWord>,
}

impl PublicParams {
    pub fn depth(&self) -> usize {
        self.groups.len()
    }
}

/// One party's private key: the party bit and the root seed. The root control
/// bit is the party bit and is not stored.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct IdpfKey {
    pub party: u8,
    pub root: Seed,
}

/// Evaluation state after absorbing `depth` input bits.
#[derive(Clone, Copy, Debug)]
pub struct EvalState {
    pub seed: Seed,
    pub t: bool,
    pub depth: usize,
}

impl EvalState {
    pub fn root(key: &IdpfKey) -> Self {
        EvalState {
            seed: key.root,
            t: key.party == 1,
            depth: 0,
        }
    }
}

/// Output share convention.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum ShareMode {
    /// y_0 + y_1 = β (party 1 negates its share).
    #[default]
    Additive,
    /// y_0 - y_1 = β (no negation).
    Subtractive,
}

/// Generate a key pair for the all-prefix point function `(α, β_1..β_n)`.
///
/// Randomness is consumed only for the two root seeds, so key generation is
/// reproducible from a recorded RNG.
pub fn gen(
    alpha: &BitString,
    betas: &[GroupValue],
    rng: &mut dyn RngCore,
    prg: &impl Prg,
) -> (IdpfKey, IdpfKey, PublicParams) {
    let n = alpha.len();
    assert!(n >= 1, "cannot generate a depth-0 key");
    assert_eq!(betas.len(), n, "one payload per level");

    let mut seeds = [Seed::from_rng(rng), Seed::from_rng(rng)];
    let keys = (
        IdpfKey {
            party: 0,
            root: seeds[0],
        },
        IdpfKey {
            party: 1,
            root: seeds[1],
        },
    );
    let mut t = [false, true];
    let mut groups = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);

    for level in 0..n {
        let desc = betas[level].desc();
        groups.push(desc);
        let bit = alpha.bit(level);
        let exp = [prg.expand(&seeds[0]), prg.expand(&seeds[1])];

        // Keep the branch that follows α; publish the other as the seed
        // correction so diverged parties re-synchronize.
        let keep = |e: &crate::prg::PrgOutput| {
            if bit {
                (e.s_right, e.t_right)
            } else {
                (e.s_left, e.t_left)
            }
        };
        let lose_seed = |e: &crate::prg::PrgOutput| if bit { e.s_left } else { e.s_right };

        let seed_cw = lose_seed(&exp[0]).xor(&lose_seed(&exp[1]));
        let t_left_cw = exp[0].t_left ^ exp[1].t_left ^ bit ^ true;
        let t_right_cw = exp[0].t_right ^ exp[1].t_right ^ bit;
        let t_keep_cw = if bit { t_right_cw } else { t_left_cw };

        let mut w = [GroupValue::zero(desc), GroupValue::zero(desc)];
        for b in 0..2 {
            let (s_keep, t_keep) = keep(&exp[b]);
            let t_new = t_keep ^ (t[b] & t_keep_cw);
            let s_tilde = if t[b] { s_keep.xor(&seed_cw) } else { s_keep };
            let (s_new, w_new) = convert(desc, &s_tilde, prg);
            seeds[b] = s_new;
            t[b] = t_new;
            w[b] = w_new;
        }

        // W_CW = (-1)^{t_1} · [β - W_0 + W_1]
        let mut payload = betas[level].sub(w[0]).add(w[1]);
        if t[1] {
            payload = payload.neg();
        }
        levels.push(CorrectionWord {
            seed: seed_cw,
            t_left: t_left_cw,
            t_right: t_right_cw,
            payload,
        });
    }

    (keys.0, keys.1, PublicParams { groups, levels })
}

/// Advance one level: absorb input bit `bit` at depth `state.depth + 1` and
/// emit this party's payload share for the visited node.
pub fn eval_next(
    party: u8,
    state: &EvalState,
    cw: &CorrectionWord,
    bit: bool,
    desc: GroupDesc,
    prg: &impl Prg,
) -> (EvalState, GroupValue) {
    let (state, value, _) = eval_next_detailed(party, state, cw, bit, desc, ShareMode::Additive, prg);
    (state, value)
}

/// [`eval_next`] with an explicit share mode, also exposing the pre-conversion
/// seed (the level's second oracle query) for the extraction harness.
pub fn eval_next_detailed(
    party: u8,
    state: &EvalState,
    cw: &CorrectionWord,
    bit: bool,
    desc: GroupDesc,
    mode: ShareMode,
    prg: &impl Prg,
) -> (EvalState, GroupValue, Seed) {
    let exp = prg.expand(&state.seed);
    let (mut s_sel, mut t_sel) = if bit {
        (exp.s_right, exp.t_right)
    } else {
        (exp.s_left, exp.t_left)
    };
    if state.t {
        s_sel = s_sel.xor(&cw.seed);
        t_sel ^= if bit { cw.t_right } else { cw.t_left };
    }
    let (next_seed, w) = convert(desc, &s_sel, prg);
    let mut y = if t_sel { w.add(cw.payload) } else { w };
    if mode == ShareMode::Additive && party == 1 {
        y = y.neg();
    }
    (
        EvalState {
            seed: next_seed,
            t: t_sel,
            depth: state.depth + 1,
        },
        y,
        s_sel,
    )
}

/// Evaluate a whole prefix from the root. `prefix` must be non-empty and no
/// longer than the tree depth.
pub fn eval_prefix(
    key: &IdpfKey,
    pp: &PublicParams,
    prefix: &BitString,
    prg: &impl Prg,
) -> GroupValue {
    eval_prefix_with_mode(key, pp, prefix, ShareMode::Additive, prg)
}

pub fn eval_prefix_with_mode(
    key: &IdpfKey,
    pp: &PublicParams,
    prefix: &BitString,
    mode: ShareMode,
    prg: &impl Prg,
) -> GroupValue {
    assert!(
        !prefix.is_empty() && prefix.len() <= pp.depth(),
        "prefix length {} out of range 1..={}",
        prefix.len(),
        pp.depth()
    );
    let mut state = EvalState::root(key);
    let mut out = GroupValue::Trivial;
    for (level, &bit) in prefix.bits().iter().enumerate() {
        let (next, y, _) = eval_next_detailed(
            key.party,
            &state,
            &pp.levels[level],
            bit,
            pp.groups[level],
            mode,
            prg,
        );
        state = next;
        out = y;
    }
    out
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const FORMAT_VERSION: u8 = 1;

pub fn serialize_key(key: &IdpfKey) -> Vec<u8> {
    let mut out = Vec::with_capacity(18);
    out.push(FORMAT_VERSION);
    out.push(key.party & 1);
    out.extend_from_slice(key.root.as_bytes());
    out
}

pub fn deserialize_key(bytes: &[u8]) -> Result<IdpfKey, CodecError> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(CodecError::Version(version));
    }
    let flags = r.u8()?;
    if flags & !1 != 0 {
        return Err(CodecError::Invalid("reserved key flag bits set"));
    }
    let block = r.array::<16>()?;
    r.finish()?;
    if block[15] & 0x80 != 0 {
        return Err(CodecError::Invalid("seed top bit set"));
    }
    Ok(IdpfKey {
        party: flags & 1,
        root: Seed::from_block(block),
    })
}

pub fn serialize_pp(pp: &PublicParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(serialized_pp_bytes(&pp.groups));
    out.push(FORMAT_VERSION);
    out.push(LAMBDA as u8);
    put_u16(&mut out, pp.depth() as u16);
    for g in &pp.groups {
        out.push(g.code());
    }
    for cw in &pp.levels {
        out.extend_from_slice(cw.seed.as_bytes());
        out.push(cw.t_left as u8 | (cw.t_right as u8) << 1);
        cw.payload.encode(&mut out);
    }
    out
}

pub fn deserialize_pp(bytes: &[u8]) -> Result<PublicParams, CodecError> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(CodecError::Version(version));
    }
    if r.u8()? != LAMBDA as u8 {
        return Err(CodecError::Invalid("unexpected lambda"));
    }
    let n = r.u16()? as usize;
    if n == 0 {
        return Err(CodecError::Invalid("zero depth"));
    }
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        groups.push(
            GroupDesc::from_code(r.u8()?).ok_or(CodecError::Invalid("unknown group code"))?,
        );
    }
    let mut levels = Vec::with_capacity(n);
    for &desc in &groups {
        let block = r.array::<16>()?;
        if block[15] & 0x80 != 0 {
            return Err(CodecError::Invalid("seed top bit set"));
        }
        let flags = r.u8()?;
        if flags & !3 != 0 {
            return Err(CodecError::Invalid("reserved level flag bits set"));
        }
        let payload = GroupValue::decode(desc, &mut r)?;
        levels.push(CorrectionWord {
            seed: Seed::from_block(block),
            t_left: flags & 1 != 0,
            t_right: flags & 2 != 0,
            payload,
        });
    }
    r.finish()?;
    Ok(PublicParams { groups, levels })
}

// ---------------------------------------------------------------------------
// Size accounting
// ---------------------------------------------------------------------------

/// Information content of one private key plus the public parameters, in
/// bits: `λ + (λ+2)·n + Σ_ℓ ⌈log|𝔾_ℓ|⌉`.
pub fn key_pp_content_bits(groups: &[GroupDesc]) -> u64 {
    content_bits_for(
        LAMBDA,
        groups.len(),
        &groups.iter().map(|g| g.bits()).collect::<Vec<_>>(),
    )
}

/// The same count for abstract per-level group widths.
pub fn content_bits_for(lambda: u32, n: usize, group_bits: &[u32]) -> u64 {
    assert_eq!(group_bits.len(), n);
    lambda as u64
        + (lambda as u64 + 2) * n as u64
        + group_bits.iter().map(|&b| b as u64).sum::<u64>()
}

/// Total fresh key material for a generated instance — both parties' root
/// seeds plus the shared public parameters counted once:
/// `2λ + (λ+2)·n + Σ_ℓ ⌈log|𝔾_ℓ|⌉`.
pub fn total_material_bits_for(lambda: u32, n: usize, group_bits: &[u32]) -> u64 {
    lambda as u64 + content_bits_for(lambda, n, group_bits)
}

/// Exact serialized sizes of the frozen wire formats.
pub fn serialized_key_bytes() -> usize {
    18
}

pub fn serialized_pp_bytes(groups: &[GroupDesc]) -> usize {
    4 + groups.len()
        + groups
            .iter()
            .map(|g| 16 + 1 + g.encoded_bytes())
            .sum::<usize>()
}

/// Encoding overhead of `serialize_key` + `serialize_pp` over the information
/// content [`key_pp_content_bits`], in bits. Itemized:
///
/// * key: version octet (8) + flags octet (8) + seed block padding (1);
/// * pp header: version, lambda, depth, group codes — `(4 + n)·8`;
/// * per level: seed block padding (1) + flags-octet padding (6) + payload
///   encoding padding (`8·bytes − bits`).
pub fn serialization_overhead_bits(groups: &[GroupDesc]) -> u64 {
    let per_level: u64 = groups
        .iter()
        .map(|g| 1 + 6 + (8 * g.encoded_bytes() as u64 - g.bits() as u64))
        .sum();
    17 + (4 + groups.len() as u64) * 8 + per_level
}
