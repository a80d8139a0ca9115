// SPDX-License-Identifier: MPL-2.0

//! Private t-heavy hitters: the prefix-count search and the two-server
//! protocol that runs it over secret-shared client inputs.
//!
//! The search walks the prefix tree breadth-first, keeping the set `H_ℓ` of
//! level-ℓ prefixes whose weight (number of active client strings starting
//! with the prefix) reaches the threshold. Per expanded parent it issues one
//! prefix-count query for the `0`-child and derives the sibling weight by
//! subtraction. On exact counts it makes at most `n·C/t` queries.
//!
//! In the two-server protocol, each client's submission is a key pair whose
//! level-ℓ payload is the pair `(1, κ_ℓ)`; the servers answer prefix-count
//! queries by summing key evaluations over the active clients, and at every
//! level first run the sketch over each client's evaluations on the full
//! candidate set `H_{ℓ-1} × {0,1}`, disqualifying clients that fail. Levels
//! `1..n-1` work in the inner field, level `n` in the leaf field. With
//! differential privacy enabled, each server adds fresh rounded Laplace noise
//! to every weight share it publishes.

use crate::bits::BitString;
use crate::codec::{put_u32, Reader};
use crate::dp;
use crate::field::{Field255, Field62, PrimeField};
use crate::idpf::{self, EvalState, GroupValue, IdpfKey, PublicParams};
use crate::prg::{KeyedPrf, Prg, Seed};
use crate::sketch::{self, CorrShare};
use crate::transport::{ByteCounters, MsgKind, ProtocolError, RoundTransport};
use rand::RngCore;
use rayon::prelude::*;

/// Heaviness threshold: absolute count or fraction of submitted clients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Absolute(u64),
    Fraction(f64),
}

impl Threshold {
    /// The count a prefix must reach. Fractions round up, floor 1.
    pub fn resolve(&self, clients: u64) -> u64 {
        match *self {
            Threshold::Absolute(t) => t.max(1),
            Threshold::Fraction(tau) => {
                assert!(tau > 0.0 && tau <= 1.0, "threshold fraction out of range");
                ((tau * clients as f64).ceil() as u64).max(1)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpParams {
    /// Per-query privacy parameter; each server adds Laplace(1/ε) rounded.
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct HeavyConfig {
    pub bits: usize,
    pub threshold: Threshold,
    pub dp: Option<DpParams>,
    /// Abort when the disqualified fraction exceeds this (1.0 disables).
    pub abort_disqualified_frac: f64,
}

impl HeavyConfig {
    pub fn new(bits: usize, threshold: Threshold) -> Self {
        HeavyConfig {
            bits,
            threshold,
            dp: None,
            abort_disqualified_frac: 1.0,
        }
    }
}

/// One server's share of one client's submission.
#[derive(Clone, Debug)]
pub struct Submission {
    pub key: IdpfKey,
    pub pp: PublicParams,
    pub corr: CorrShare,
}

/// Build the two per-server submissions for input `alpha`: an IDPF with
/// payload `(1, κ_ℓ)` per level (inner pairs, leaf pair at the bottom) plus
/// the sketch correlated randomness.
pub fn client_submissions(
    alpha: &BitString,
    rng: &mut dyn RngCore,
    prg: &impl Prg,
) -> [Submission; 2] {
    let n = alpha.len();
    assert!(n >= 1);
    let mask_seeds = [Seed::from_rng(rng), Seed::from_rng(rng)];
    let prfs = [KeyedPrf::new(&mask_seeds[0]), KeyedPrf::new(&mask_seeds[1])];

    let mut betas = Vec::with_capacity(n);
    let mut inner_ab: [Vec<(Field62, Field62)>; 2] = [Vec::new(), Vec::new()];
    for level in 1..n {
        let (kappa, ab) = sketch::encode_level::<Field62>(&prfs[0], &prfs[1], level as u16, rng);
        betas.push(GroupValue::InnerPair(Field62::one(), kappa));
        inner_ab[0].push(ab[0]);
        inner_ab[1].push(ab[1]);
    }
    let (kappa_leaf, leaf_ab) = sketch::encode_level::<Field255>(&prfs[0], &prfs[1], n as u16, rng);
    betas.push(GroupValue::LeafPair(Field255::one(), kappa_leaf));

    let (k0, k1, pp) = idpf::gen(alpha, &betas, rng, prg);
    [
        Submission {
            key: k0,
            pp: pp.clone(),
            corr: CorrShare {
                mask_seed: mask_seeds[0],
                inner_ab: std::mem::take(&mut inner_ab[0]),
                leaf_ab: leaf_ab[0],
            },
        },
        Submission {
            key: k1,
            pp,
            corr: CorrShare {
                mask_seed: mask_seeds[1],
                inner_ab: std::mem::take(&mut inner_ab[1]),
                leaf_ab: leaf_ab[1],
            },
        },
    ]
}

// ---------------------------------------------------------------------------
// Prefix-count search over an abstract oracle
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct SearchResult {
    pub hits: Vec<BitString>,
    /// Every child weight the search observed (the run's leakage record
    /// together with `heavy_prefixes`).
    pub weights: Vec<(BitString, i64)>,
    /// The retained heavy prefixes per level with their weights.
    pub heavy_prefixes: Vec<(BitString, i64)>,
    pub queries: u64,
}

/// The prefix-count search against an arbitrary oracle. `oracle(p)` must
/// return the (possibly noised) weight of prefix `p`. With an exact oracle
/// the result is exactly the set of strings held at least `t` times, after
/// at most `n·C/t` queries.
pub fn hh_search(
    oracle: &mut dyn FnMut(&BitString) -> i64,
    t: u64,
    bits: usize,
    clients: u64,
) -> SearchResult {
    assert!(t >= 1);
    let mut result = SearchResult::default();
    let mut parents = vec![(BitString::empty(), clients as i64)];
    for _level in 1..=bits {
        let mut next = Vec::new();
        for (p, w_parent) in &parents {
            let w0 = oracle(&p.child(false));
            result.queries += 1;
            let w1 = w_parent - w0;
            for (child, w) in [(p.child(false), w0), (p.child(true), w1)] {
                result.weights.push((child.clone(), w));
                if w >= t as i64 {
                    result.heavy_prefixes.push((child.clone(), w));
                    next.push((child, w));
                }
            }
        }
        parents = next;
    }
    result.hits = parents.into_iter().map(|(p, _)| p).collect();
    result.hits.sort();
    result
}

/// Exact number of strings in `strings` with prefix `p`.
pub fn plaintext_prefix_count(strings: &[BitString], p: &BitString) -> u64 {
    strings.iter().filter(|s| p.is_prefix_of(s)).count() as u64
}

/// The strings of length `bits` held at least `t` times, sorted.
pub fn plaintext_heavy_hitters(strings: &[BitString], t: u64, bits: usize) -> Vec<BitString> {
    let mut counts: std::collections::HashMap<&BitString, u64> = std::collections::HashMap::new();
    for s in strings {
        debug_assert_eq!(s.len(), bits);
        *counts.entry(s).or_default() += 1;
    }
    let mut out: Vec<BitString> = counts
        .into_iter()
        .filter(|&(_, c)| c >= t)
        .map(|(s, _)| s.clone())
        .collect();
    out.sort();
    out
}

/// One server's share of the number of active client strings with prefix
/// `p`: the sum of the first payload coordinate of each key evaluation.
pub fn serve_prefix_query<F: LevelField>(
    subs: &[Submission],
    active: &[bool],
    p: &BitString,
    prg: &(impl Prg + Sync),
) -> F {
    subs.par_iter()
        .zip(active.par_iter())
        .filter(|(_, &a)| a)
        .map(|(sub, _)| F::pair_from(&idpf::eval_prefix(&sub.key, &sub.pp, p, prg)).0)
        .reduce(F::zero, |x, y| x.add(y))
}

// ---------------------------------------------------------------------------
// The two-server protocol driver
// ---------------------------------------------------------------------------

/// Fields a protocol level can work in.
pub trait LevelField: PrimeField {
    /// Split a payload-group value into its (value, authenticator) pair.
    fn pair_from(v: &GroupValue) -> (Self, Self);
    /// Interpret a canonical residue as a signed weight (values above p/2
    /// are negative, from DP noise).
    fn lift_signed(self) -> Option<i64>;
    /// Embed a signed noise value.
    fn embed_signed(v: i64) -> Self;
}

impl LevelField for Field62 {
    fn pair_from(v: &GroupValue) -> (Self, Self) {
        match v {
            GroupValue::InnerPair(a, b) => (*a, *b),
            other => panic!("expected inner pair, got {:?}", other.desc()),
        }
    }

    fn lift_signed(self) -> Option<i64> {
        let v = self.value();
        let half = (crate::field::P62 - 1) / 2;
        if v <= half {
            Some(v as i64)
        } else {
            Some(-((crate::field::P62 - v) as i64))
        }
    }

    fn embed_signed(v: i64) -> Self {
        if v >= 0 {
            Self::from_u64(v as u64)
        } else {
            Self::from_u64(v.unsigned_abs()).neg()
        }
    }
}

impl LevelField for Field255 {
    fn pair_from(v: &GroupValue) -> (Self, Self) {
        match v {
            GroupValue::LeafPair(a, b) => (*a, *b),
            other => panic!("expected leaf pair, got {:?}", other.desc()),
        }
    }

    fn lift_signed(self) -> Option<i64> {
        if let Some(v) = self.to_u64() {
            if v <= i64::MAX as u64 {
                return Some(v as i64);
            }
        }
        if let Some(v) = self.neg().to_u64() {
            if v <= i64::MAX as u64 {
                return Some(-(v as i64));
            }
        }
        None
    }

    fn embed_signed(v: i64) -> Self {
        if v >= 0 {
            Self::from_u64(v as u64)
        } else {
            Self::from_u64(v.unsigned_abs()).neg()
        }
    }
}

/// Per-level communication record, one entry per tree level actually run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelStats {
    pub level: u16,
    /// Candidates evaluated (2 × surviving parents).
    pub candidates: usize,
    /// Clients active during this level's sketch.
    pub active: usize,
    /// Parents queried (published weight shares).
    pub queried: usize,
    /// Field-element wire width at this level.
    pub field_bytes: usize,
    pub bytes_r1: u64,
    pub bytes_r2: u64,
    pub bytes_weights: u64,
}

#[derive(Clone, Debug)]
pub struct HeavyOutput {
    pub heavy_hitters: Vec<BitString>,
    /// Every reconstructed child weight, in query order (leakage record).
    pub weights: Vec<(BitString, i64)>,
    /// Heavy prefixes retained per level, with weights.
    pub heavy_prefixes: Vec<(BitString, i64)>,
    pub threshold: u64,
    pub disqualified: usize,
    pub queries: u64,
    pub bytes: ByteCounters,
    pub levels: Vec<LevelStats>,
    /// PRG calls this server spent on key evaluation (driver-side count:
    /// evaluation steps times the per-level cost).
    pub prg_calls: u64,
}

struct LevelOutcome {
    children: Vec<BitString>,
    child_weights: Vec<i64>,
    published: Vec<(BitString, i64)>,
    stats: LevelStats,
}

struct Driver<'a, P: Prg + Sync> {
    party: u8,
    subs: &'a [Submission],
    shared_seed: Seed,
    prg: &'a P,
    active: Vec<bool>,
    states: Vec<Vec<EvalState>>,
    counters: ByteCounters,
    prg_calls: u64,
    queries: u64,
}

impl<P: Prg + Sync> Driver<'_, P> {
    fn exchange(
        &mut self,
        transport: &mut dyn RoundTransport,
        kind: MsgKind,
        level: u16,
        payload: Vec<u8>,
        tally: fn(&mut ByteCounters) -> &mut u64,
    ) -> Result<Vec<u8>, ProtocolError> {
        // Payload layout: [u32 element count][elements]. Only element bytes
        // are tallied in the category; headers count as control.
        *tally(&mut self.counters) += payload.len() as u64 - 4;
        self.counters.control += 4 + 7; // count header + frame header
        self.counters.messages += 1;
        transport.exchange(kind, level, &payload)
    }

    fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Run one level: expand candidates, verify every active client's
    /// evaluation vector, drop failures, then publish the 0-child weight
    /// shares and reconstruct the children weights.
    #[allow(clippy::too_many_arguments)]
    fn run_level<F: LevelField>(
        &mut self,
        level: u16,
        parents: &[BitString],
        parent_weights: &[i64],
        ab_of: impl Fn(&CorrShare) -> (F, F) + Sync,
        dp: Option<DpParams>,
        noise_rng: &mut dyn RngCore,
        threshold: u64,
        transport: &mut dyn RoundTransport,
    ) -> Result<LevelOutcome, ProtocolError> {
        let n_parents = parents.len();
        let m = 2 * n_parents;

        // Advance every active client's cached states one level, collecting
        // the (value, authenticator) evaluation vectors over the candidates.
        let desc = self.subs.first().map(|s| s.pp.groups[level as usize - 1]);
        let step_cost = desc.map(|d| d.cost() as u64).unwrap_or(0);
        let evals: Vec<Option<(Vec<EvalState>, Vec<F>, Vec<F>)>> = self
            .subs
            .par_iter()
            .zip(self.states.par_iter())
            .zip(self.active.par_iter())
            .map(|((sub, states), &active)| {
                if !active {
                    return None;
                }
                let cw = &sub.pp.levels[level as usize - 1];
                let desc = sub.pp.groups[level as usize - 1];
                let mut next_states = Vec::with_capacity(m);
                let mut v = Vec::with_capacity(m);
                let mut v_star = Vec::with_capacity(m);
                for state in states.iter() {
                    for bit in [false, true] {
                        let (st, y) =
                            idpf::eval_next(sub.key.party, state, cw, bit, desc, self.prg);
                        let (a, b) = F::pair_from(&y);
                        next_states.push(st);
                        v.push(a);
                        v_star.push(b);
                    }
                }
                Some((next_states, v, v_star))
            })
            .collect();
        self.prg_calls += (self.active_count() * m) as u64 * step_cost;

        // Sketch round 1: batched masked triples for active clients.
        let mut triples: Vec<[F; 3]> = Vec::new();
        let mut r2_inputs: Vec<(usize, (F, F))> = Vec::new();
        for (idx, ev) in evals.iter().enumerate() {
            let Some((_, v, v_star)) = ev else { continue };
            let (r, r_sq) =
                sketch::derive_sketch_randomness::<F>(&self.shared_seed, idx as u64, level, m);
            let locals = sketch::compute_locals(v, v_star, &r, &r_sq);
            let mask = KeyedPrf::new(&self.subs[idx].corr.mask_seed);
            let masks = sketch::mask_shares::<F>(&mask, level);
            triples.push(sketch::round1(locals, masks));
            r2_inputs.push((idx, ab_of(&self.subs[idx].corr)));
        }
        let mut payload = Vec::with_capacity(4 + triples.len() * 3 * F::BYTES);
        put_u32(&mut payload, triples.len() as u32);
        for t in &triples {
            for e in t {
                e.encode(&mut payload);
            }
        }
        let peer = self.exchange(transport, MsgKind::SketchR1, level, payload, |c| {
            &mut c.sketch_r1
        })?;
        let peer_triples =
            decode_elems::<F>(&peer, 3, triples.len(), MsgKind::SketchR1)?;

        // Round 2: shares of the verification polynomial.
        let mut out_shares = Vec::with_capacity(triples.len());
        for (i, (_idx, ab)) in r2_inputs.iter().enumerate() {
            let z_pub = [
                triples[i][0].add(peer_triples[i][0]),
                triples[i][1].add(peer_triples[i][1]),
                triples[i][2].add(peer_triples[i][2]),
            ];
            out_shares.push(sketch::round2_share(self.party, z_pub, *ab));
        }
        let mut payload = Vec::with_capacity(4 + out_shares.len() * F::BYTES);
        put_u32(&mut payload, out_shares.len() as u32);
        for e in &out_shares {
            e.encode(&mut payload);
        }
        let peer = self.exchange(transport, MsgKind::SketchR2, level, payload, |c| {
            &mut c.sketch_r2
        })?;
        let peer_shares = decode_elems::<F>(&peer, 1, out_shares.len(), MsgKind::SketchR2)?;

        // Both servers reach identical verdicts: the share sum is symmetric.
        let mut reject_bitmap = vec![0u8; out_shares.len().div_ceil(8)];
        let mut rejected = Vec::new();
        for (i, (idx, _)) in r2_inputs.iter().enumerate() {
            let ok = if self.party == 0 {
                sketch::decide(out_shares[i], peer_shares[i][0])
            } else {
                sketch::decide(peer_shares[i][0], out_shares[i])
            };
            if !ok {
                reject_bitmap[i / 8] |= 1 << (i % 8);
                rejected.push(*idx);
            }
        }
        // Cross-check the verdicts; any mismatch is a desync.
        let mut payload = Vec::with_capacity(4 + reject_bitmap.len());
        put_u32(&mut payload, reject_bitmap.len() as u32);
        payload.extend_from_slice(&reject_bitmap);
        let peer = self.exchange(transport, MsgKind::Reject, level, payload, |c| {
            &mut c.control
        })?;
        if peer.len() < 4 || &peer[4..] != reject_bitmap.as_slice() {
            return Err(ProtocolError::Malformed(
                MsgKind::Reject,
                "verdict bitmaps differ",
            ));
        }
        for idx in &rejected {
            self.active[*idx] = false;
        }

        // Commit the surviving clients' advanced states.
        let mut committed: Vec<Vec<F>> = Vec::with_capacity(self.subs.len());
        for (idx, ev) in evals.into_iter().enumerate() {
            match ev {
                Some((st, v, _)) if self.active[idx] => {
                    self.states[idx] = st;
                    committed.push(v);
                }
                _ => {
                    self.states[idx] = Vec::new();
                    committed.push(Vec::new());
                }
            }
        }

        // Weight shares for each parent's 0-child, noised per server when
        // differential privacy is on.
        let mut weight_shares = Vec::with_capacity(n_parents);
        for parent_idx in 0..n_parents {
            let col = 2 * parent_idx; // the 0-child column
            let mut share = F::zero();
            for row in committed.iter().filter(|r| !r.is_empty()) {
                share = share.add(row[col]);
            }
            if let Some(dp_params) = dp {
                share = share.add(F::embed_signed(dp::sample_noise(
                    dp_params.epsilon,
                    noise_rng,
                )));
            }
            weight_shares.push(share);
        }
        self.queries += n_parents as u64;
        let mut payload = Vec::with_capacity(4 + weight_shares.len() * F::BYTES);
        put_u32(&mut payload, weight_shares.len() as u32);
        for e in &weight_shares {
            e.encode(&mut payload);
        }
        let peer = self.exchange(transport, MsgKind::Weights, level, payload, |c| {
            &mut c.weights
        })?;
        let peer_weights = decode_elems::<F>(&peer, 1, weight_shares.len(), MsgKind::Weights)?;

        // Reconstruct, derive siblings by subtraction, prune, and keep the
        // surviving children's state columns.
        let mut children = Vec::new();
        let mut child_weights = Vec::new();
        let mut published = Vec::new();
        let mut kept_cols = Vec::new();
        for parent_idx in 0..n_parents {
            let w0 = weight_shares[parent_idx]
                .add(peer_weights[parent_idx][0])
                .lift_signed()
                .ok_or(ProtocolError::Malformed(
                    MsgKind::Weights,
                    "weight out of range",
                ))?;
            let w1 = parent_weights[parent_idx] - w0;
            for (child_side, w) in [(false, w0), (true, w1)] {
                let child = parents[parent_idx].child(child_side);
                published.push((child.clone(), w));
                if w >= threshold as i64 {
                    kept_cols.push(2 * parent_idx + child_side as usize);
                    children.push(child);
                    child_weights.push(w);
                }
            }
        }
        for (idx, states) in self.states.iter_mut().enumerate() {
            if !self.active[idx] || states.is_empty() {
                continue;
            }
            *states = kept_cols.iter().map(|&c| states[c]).collect();
        }

        Ok(LevelOutcome {
            children,
            child_weights,
            published,
            stats: LevelStats {
                level,
                candidates: m,
                active: triples.len(),
                queried: n_parents,
                field_bytes: F::BYTES,
                bytes_r1: (triples.len() * 3 * F::BYTES) as u64,
                bytes_r2: (triples.len() * F::BYTES) as u64,
                bytes_weights: (n_parents * F::BYTES) as u64,
            },
        })
    }
}

fn decode_elems<F: PrimeField>(
    payload: &[u8],
    width: usize,
    expect: usize,
    kind: MsgKind,
) -> Result<Vec<Vec<F>>, ProtocolError> {
    let mut r = Reader::new(payload);
    let count = r
        .u32()
        .map_err(|_| ProtocolError::Malformed(kind, "missing count"))? as usize;
    if count != expect {
        return Err(ProtocolError::Malformed(kind, "element count mismatch"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = Vec::with_capacity(width);
        for _ in 0..width {
            let bytes = r
                .take(F::BYTES)
                .map_err(|_| ProtocolError::Malformed(kind, "truncated elements"))?;
            row.push(F::decode(bytes).map_err(|_| ProtocolError::Malformed(kind, "bad element"))?);
        }
        out.push(row);
    }
    r.finish()
        .map_err(|_| ProtocolError::Malformed(kind, "trailing bytes"))?;
    Ok(out)
}

/// Run the full heavy-hitters aggregate phase for one server.
///
/// `subs` is the reconciled roster (same order on both servers); the shared
/// seed comes from the nonce exchange. Levels run strictly in sequence with
/// three framed exchanges each (sketch round 1, round 2 + verdicts, weights).
pub fn run_heavy_hitters(
    party: u8,
    cfg: &HeavyConfig,
    subs: &[Submission],
    shared_seed: &Seed,
    noise_rng: &mut dyn RngCore,
    prg: &(impl Prg + Sync),
    transport: &mut dyn RoundTransport,
) -> Result<HeavyOutput, ProtocolError> {
    let n = cfg.bits;
    for sub in subs {
        if sub.pp.depth() != n {
            return Err(ProtocolError::Config(
                "submission depth does not match configured bit length".into(),
            ));
        }
    }
    let threshold = cfg.threshold.resolve(subs.len() as u64);
    let mut driver = Driver {
        party,
        subs,
        shared_seed: *shared_seed,
        prg,
        active: vec![true; subs.len()],
        states: subs.iter().map(|s| vec![EvalState::root(&s.key)]).collect(),
        counters: ByteCounters::default(),
        prg_calls: 0,
        queries: 0,
    };

    let mut parents = vec![BitString::empty()];
    let mut parent_weights = vec![subs.len() as i64];
    let mut weights_log = Vec::new();
    let mut heavy_log = Vec::new();
    let mut level_stats = Vec::new();

    for level in 1..=n as u16 {
        if parents.is_empty() {
            break;
        }
        // The root weight is the verified-active count; pin it right before
        // the level-1 queries (verification may shrink the roster).
        let outcome = if (level as usize) < n {
            driver.run_level::<Field62>(
                level,
                &parents,
                &parent_weights,
                |c| c.inner_ab[level as usize - 1],
                cfg.dp,
                noise_rng,
                threshold,
                transport,
            )?
        } else {
            driver.run_level::<Field255>(
                level,
                &parents,
                &parent_weights,
                |c| c.leaf_ab,
                cfg.dp,
                noise_rng,
                threshold,
                transport,
            )?
        };

        let disqualified = subs.len() - driver.active_count();
        if subs.len() > 0
            && (disqualified as f64 / subs.len() as f64) > cfg.abort_disqualified_frac
        {
            return Err(ProtocolError::TooManyDisqualified {
                disqualified,
                total: subs.len(),
            });
        }

        weights_log.extend(outcome.published.iter().cloned());
        heavy_log.extend(
            outcome
                .children
                .iter()
                .cloned()
                .zip(outcome.child_weights.iter().copied()),
        );
        level_stats.push(outcome.stats);
        parents = outcome.children;
        parent_weights = outcome.child_weights;
    }

    let mut hits = parents;
    hits.sort();
    Ok(HeavyOutput {
        heavy_hitters: hits,
        weights: weights_log,
        heavy_prefixes: heavy_log,
        threshold,
        disqualified: subs.len() - driver.active_count(),
        queries: driver.queries,
        bytes: driver.counters,
        levels: level_stats,
        prg_calls: driver.prg_calls,
    })
}
