// SPDX-License-Identifier: MPL-2.0

//! Key-extraction harness (test tooling, `harness` feature).
//!
//! Given a possibly malformed key pair with shared public parameters and the
//! ordered transcript of every PRG seed the keys' creator queried, the
//! extractor walks the prefix tree from the root and descends only through
//! children whose evaluation is fully determined by transcript queries. Per
//! level it reports the lexicographically smallest examined string whose
//! reconstructed value is permissible (nonzero, `{1}` by default), or the
//! all-ones string when none is.
//!
//! A child of `x` is admitted when, for both parties, the two oracle inputs
//! its evaluation adds on top of the parent's — the parent state seed (the
//! level's expansion query) and the child's pre-conversion seed — appear in
//! the transcript, and the pre-conversion seed does not duplicate one already
//! admitted at the same depth (the `Stop` rule; both seeds are stored, the
//! duplicate test is on the pre-conversion seed, which is the per-child
//! unique query).
//!
//! The harness treats the production fixed-key PRG as the random oracle.

use crate::bits::BitString;
use crate::field::{Field255, PrimeField};
use crate::idpf::{self, EvalState, GroupValue, IdpfKey, PublicParams, ShareMode};
use crate::prg::{FixedKeyPrg, OracleTranscript, RecordingPrg, Seed};
use rand::RngCore;
use std::collections::HashSet;

/// Per-level membership predicate over permissible payloads. Level is
/// 1-based; zero must never be permissible.
pub type Permissible<'a> = &'a dyn Fn(usize, &GroupValue) -> bool;

/// The default permissible set: the singleton `{1}` in the leaf field.
pub fn permit_leaf_one(_level: usize, v: &GroupValue) -> bool {
    matches!(v, GroupValue::Leaf(x) if *x == Field255::one())
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    /// The extracted string per level ℓ = 1..n (length-ℓ prefixes).
    pub per_level: Vec<BitString>,
    /// Number of child strings examined, including the root's two probes.
    /// For any transcript that admits at least one node this is at most
    /// `2·n·t` with `t` the transcript length.
    pub examined: u64,
}

/// Run the extractor against `(k0, k1, pp)` and the creator's transcript.
pub fn extract(
    k0: &IdpfKey,
    k1: &IdpfKey,
    pp: &PublicParams,
    permissible: Permissible<'_>,
    transcript: &OracleTranscript,
) -> ExtractionResult {
    let n = pp.depth();
    let prg = FixedKeyPrg;
    // Worklist of admitted nodes with both parties' cached states.
    let mut frontier: Vec<(BitString, [EvalState; 2])> = vec![(
        BitString::empty(),
        [EvalState::root(k0), EvalState::root(k1)],
    )];
    // Admitted (string, reconstructed value) pairs, and the per-depth seed
    // store backing the Stop rule.
    let mut admitted: Vec<(BitString, GroupValue)> = Vec::new();
    let mut stop_seeds: Vec<HashSet<[u8; 16]>> = vec![HashSet::new(); n + 1];
    let mut stored_pairs: Vec<(Seed, Seed, usize)> = Vec::new();
    let mut examined = 0u64;

    while let Some((x, states)) = frontier.pop() {
        if x.len() == n {
            continue;
        }
        let depth = x.len() + 1;
        let desc = pp.groups[depth - 1];
        let cw = &pp.levels[depth - 1];
        for z in [false, true] {
            examined += 1;
            let mut next_states = [states[0]; 2];
            let mut tilde = [states[0].seed; 2];
            let mut ys = [GroupValue::zero(desc); 2];
            for b in 0..2 {
                let (st, y, s_tilde) = idpf::eval_next_detailed(
                    b as u8,
                    &states[b],
                    cw,
                    z,
                    desc,
                    ShareMode::Additive,
                    &prg,
                );
                next_states[b] = st;
                tilde[b] = s_tilde;
                ys[b] = y;
            }
            // Membership: the child's two new oracle inputs per party.
            let known = (0..2).all(|b| {
                transcript.contains(&states[b].seed) && transcript.contains(&tilde[b])
            });
            let stop = (0..2).any(|b| stop_seeds[depth].contains(tilde[b].as_bytes()));
            if known && !stop {
                let v = ys[0].add(ys[1]);
                admitted.push((x.child(z), v));
                for b in 0..2 {
                    stop_seeds[depth].insert(*tilde[b].as_bytes());
                    stored_pairs.push((tilde[b], states[b].seed, depth));
                }
                frontier.push((x.child(z), next_states));
            }
        }
    }
    let _ = stored_pairs;

    let per_level = (1..=n)
        .map(|level| {
            admitted
                .iter()
                .filter(|(x, v)| x.len() == level && permissible(level, v))
                .map(|(x, _)| x.clone())
                .chain(std::iter::once(BitString::ones(level)))
                .min()
                .unwrap()
        })
        .collect();
    ExtractionResult {
        per_level,
        examined,
    }
}

/// Built-in adversary strategies for the extraction game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Generate honest keys, evaluate both along α, submit α.
    HonestReplay,
    /// Honest keys, then flip one bit of a correction-word seed.
    PpTamper,
    /// Honest keys with payload 2 everywhere, against the permissible set {1}.
    PayloadScale,
}

#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub won: bool,
    pub result: ExtractionResult,
    /// Oracle calls in the adversary transcript (the game's `t`).
    pub transcript_calls: u64,
    pub levels: usize,
}

/// Play one round of the extraction game with a built-in strategy: the
/// adversary produces `(k0, k1, pp, x*)` and its oracle transcript; it wins
/// if the extractor misses `x*`'s prefix at `|x*|` while the keys evaluate to
/// a permissible value there.
pub fn adversarial_probe(strategy: Strategy, bits: usize, rng: &mut dyn RngCore) -> ProbeOutcome {
    let oracle = RecordingPrg::new();
    let mut alpha_bits = Vec::with_capacity(bits);
    for _ in 0..bits {
        alpha_bits.push(rng.next_u32() & 1 == 1);
    }
    let alpha = BitString::from_bools(&alpha_bits);
    let payload = match strategy {
        Strategy::PayloadScale => Field255::from_u64(2),
        _ => Field255::one(),
    };
    let betas = vec![GroupValue::Leaf(payload); bits];
    let (k0, k1, mut pp) = idpf::gen(&alpha, &betas, rng, &oracle);
    // The adversary's full-depth evaluations of both keys at α.
    idpf::eval_prefix(&k0, &pp, &alpha, &oracle);
    idpf::eval_prefix(&k1, &pp, &alpha, &oracle);
    if strategy == Strategy::PpTamper {
        let level = (rng.next_u32() as usize) % bits;
        let mut block = *pp.levels[level].seed.as_bytes();
        block[0] ^= 1;
        pp.levels[level].seed = Seed::from_block(block);
    }
    let transcript = oracle.take_transcript();
    let calls = transcript.calls();

    let result = extract(&k0, &k1, &pp, &permit_leaf_one, &transcript);
    // Winning condition at x* = α (full length).
    let prg = FixedKeyPrg;
    let value = idpf::eval_prefix(&k0, &pp, &alpha, &prg)
        .add(idpf::eval_prefix(&k1, &pp, &alpha, &prg));
    let permissible_at_target = permit_leaf_one(bits, &value);
    let won = permissible_at_target && result.per_level[bits - 1] != alpha;
    ProbeOutcome {
        won,
        result,
        transcript_calls: calls,
        levels: bits,
    }
}
