// SPDX-License-Identifier: MPL-2.0

//! Private subset histograms: for a server-held candidate set
//! `S = {σ_1..σ_m}` of n-bit strings, count how many clients hold each σ_j
//! without learning anything else about client inputs.
//!
//! Each client submits a plain DPF (trivial intermediate levels) whose leaf
//! payload is `(1, κ)` in the leaf-field pair, plus correlated randomness for
//! one sketch. The servers evaluate every key over `S`, verify each client's
//! evaluation vector with the sketch, drop failures, and publish the summed
//! value shares; the share sums are the counts.

use crate::bits::BitString;
use crate::codec::{put_u32, Reader};
use crate::field::{Field255, PrimeField};
use crate::heavy::LevelField;
use crate::idpf::{self, GroupValue, IdpfKey, PublicParams};
use crate::prg::{KeyedPrf, Prg, Seed};
use crate::sketch::{self, CorrShare};
use crate::transport::{ByteCounters, MsgKind, ProtocolError, RoundTransport};
use rand::RngCore;
use rayon::prelude::*;

/// The servers' candidate set: distinct strings of one common length.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    strings: Vec<BitString>,
    bits: usize,
}

impl CandidateSet {
    pub fn new(strings: Vec<BitString>, bits: usize) -> Result<Self, ProtocolError> {
        assert!(bits >= 1);
        let mut seen = std::collections::HashSet::new();
        for s in &strings {
            if s.len() != bits {
                return Err(ProtocolError::Config(
                    "candidate length differs from configured bit length".into(),
                ));
            }
            if !seen.insert(s.clone()) {
                return Err(ProtocolError::Config("duplicate candidate string".into()));
            }
        }
        Ok(CandidateSet { strings, bits })
    }

    pub fn strings(&self) -> &[BitString] {
        &self.strings
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// One server's share of one client's histogram submission.
#[derive(Clone, Debug)]
pub struct HistogramSubmission {
    pub key: IdpfKey,
    pub pp: PublicParams,
    pub corr: CorrShare,
}

/// Client side: a DPF for `alpha` with leaf payload `(1, κ)` and the sketch
/// correlated randomness for the single (leaf) verification.
pub fn client_submit(
    alpha: &BitString,
    rng: &mut dyn RngCore,
    prg: &impl Prg,
) -> [HistogramSubmission; 2] {
    let n = alpha.len();
    assert!(n >= 1);
    let mask_seeds = [Seed::from_rng(rng), Seed::from_rng(rng)];
    let prfs = [KeyedPrf::new(&mask_seeds[0]), KeyedPrf::new(&mask_seeds[1])];
    let (kappa, leaf_ab) = sketch::encode_level::<Field255>(&prfs[0], &prfs[1], n as u16, rng);
    let mut betas = vec![GroupValue::Trivial; n - 1];
    betas.push(GroupValue::LeafPair(Field255::one(), kappa));
    let (k0, k1, pp) = idpf::gen(alpha, &betas, rng, prg);
    [(k0, mask_seeds[0], leaf_ab[0]), (k1, mask_seeds[1], leaf_ab[1])].map(
        |(key, mask_seed, ab)| HistogramSubmission {
            key,
            pp: pp.clone(),
            corr: CorrShare {
                mask_seed,
                inner_ab: Vec::new(),
                leaf_ab: ab,
            },
        },
    )
}

/// Evaluate one submission over the whole candidate set: the client's
/// (value, authenticator) share vectors.
pub fn evaluate_on_set(
    sub: &HistogramSubmission,
    set: &CandidateSet,
    prg: &impl Prg,
) -> (Vec<Field255>, Vec<Field255>) {
    let mut v = Vec::with_capacity(set.len());
    let mut v_star = Vec::with_capacity(set.len());
    for sigma in set.strings() {
        let (a, b) = Field255::pair_from(&idpf::eval_prefix(&sub.key, &sub.pp, sigma, prg));
        v.push(a);
        v_star.push(b);
    }
    (v, v_star)
}

/// Sum the verified clients' value-share vectors per candidate.
pub fn aggregate(rows: &[Vec<Field255>], candidates: usize) -> Vec<Field255> {
    let mut out = vec![Field255::zero(); candidates];
    for row in rows {
        assert_eq!(row.len(), candidates, "row width mismatch");
        for (acc, v) in out.iter_mut().zip(row) {
            *acc = acc.add(*v);
        }
    }
    out
}

/// Reconstruct counts from the two servers' aggregated value vectors.
/// `cap` is the configured client cap; any count above it means a corrupted
/// aggregate (the field is far larger than any roster).
pub fn combine(v0: &[Field255], v1: &[Field255], cap: u64) -> Result<Vec<u64>, ProtocolError> {
    assert_eq!(v0.len(), v1.len(), "aggregate width mismatch");
    v0.iter()
        .zip(v1)
        .map(|(a, b)| match a.add(*b).to_u64() {
            Some(c) if c <= cap => Ok(c),
            _ => Err(ProtocolError::Malformed(
                MsgKind::Weights,
                "count exceeds client cap",
            )),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct HistogramOutput {
    /// Count per candidate, aligned with the candidate set.
    pub counts: Vec<u64>,
    pub disqualified: usize,
    pub bytes: ByteCounters,
}

/// Run the subset-histogram aggregate phase for one server. One sketch
/// verification per client (at the leaf level), then a single values
/// exchange.
pub fn run_histogram(
    party: u8,
    set: &CandidateSet,
    subs: &[HistogramSubmission],
    shared_seed: &Seed,
    prg: &(impl Prg + Sync),
    transport: &mut dyn RoundTransport,
) -> Result<HistogramOutput, ProtocolError> {
    let level = set.bits() as u16;
    for sub in subs {
        if sub.pp.depth() != set.bits() {
            return Err(ProtocolError::Config(
                "submission depth does not match candidate length".into(),
            ));
        }
    }
    let m = set.len();
    let mut counters = ByteCounters::default();

    let rows: Vec<(Vec<Field255>, Vec<Field255>)> = subs
        .par_iter()
        .map(|sub| evaluate_on_set(sub, set, prg))
        .collect();

    // Sketch rounds over every client's evaluation vector.
    let mut triples = Vec::with_capacity(subs.len());
    for (idx, (v, v_star)) in rows.iter().enumerate() {
        let (r, r_sq) =
            sketch::derive_sketch_randomness::<Field255>(shared_seed, idx as u64, level, m);
        let locals = sketch::compute_locals(v, v_star, &r, &r_sq);
        let masks = sketch::mask_shares::<Field255>(
            &KeyedPrf::new(&subs[idx].corr.mask_seed),
            level,
        );
        triples.push(sketch::round1(locals, masks));
    }
    let mut payload = Vec::with_capacity(4 + triples.len() * 3 * Field255::BYTES);
    put_u32(&mut payload, triples.len() as u32);
    for t in &triples {
        for e in t {
            e.encode(&mut payload);
        }
    }
    counters.sketch_r1 += payload.len() as u64 - 4;
    counters.control += 11;
    counters.messages += 1;
    let peer = transport.exchange(MsgKind::SketchR1, level, &payload)?;
    let peer_triples = decode_rows(&peer, 3, triples.len())?;

    let mut out_shares = Vec::with_capacity(triples.len());
    for (i, t) in triples.iter().enumerate() {
        let z_pub = [
            t[0].add(peer_triples[i][0]),
            t[1].add(peer_triples[i][1]),
            t[2].add(peer_triples[i][2]),
        ];
        out_shares.push(sketch::round2_share(party, z_pub, subs[i].corr.leaf_ab));
    }
    let mut payload = Vec::with_capacity(4 + out_shares.len() * Field255::BYTES);
    put_u32(&mut payload, out_shares.len() as u32);
    for e in &out_shares {
        e.encode(&mut payload);
    }
    counters.sketch_r2 += payload.len() as u64 - 4;
    counters.control += 11;
    counters.messages += 1;
    let peer = transport.exchange(MsgKind::SketchR2, level, &payload)?;
    let peer_shares = decode_rows(&peer, 1, out_shares.len())?;

    let mut reject_bitmap = vec![0u8; subs.len().div_ceil(8)];
    let mut verified_rows = Vec::new();
    let mut disqualified = 0;
    for (i, (v, _)) in rows.iter().enumerate() {
        let ok = if party == 0 {
            sketch::decide(out_shares[i], peer_shares[i][0])
        } else {
            sketch::decide(peer_shares[i][0], out_shares[i])
        };
        if ok {
            verified_rows.push(v.clone());
        } else {
            reject_bitmap[i / 8] |= 1 << (i % 8);
            disqualified += 1;
        }
    }
    let mut payload = Vec::with_capacity(4 + reject_bitmap.len());
    put_u32(&mut payload, reject_bitmap.len() as u32);
    payload.extend_from_slice(&reject_bitmap);
    counters.control += 11 + reject_bitmap.len() as u64;
    counters.messages += 1;
    let peer = transport.exchange(MsgKind::Reject, level, &payload)?;
    if peer.len() < 4 || &peer[4..] != reject_bitmap.as_slice() {
        return Err(ProtocolError::Malformed(
            MsgKind::Reject,
            "verdict bitmaps differ",
        ));
    }

    // Publish the aggregated value shares.
    let agg = aggregate(&verified_rows, m);
    let mut payload = Vec::with_capacity(4 + agg.len() * Field255::BYTES);
    put_u32(&mut payload, agg.len() as u32);
    for e in &agg {
        e.encode(&mut payload);
    }
    counters.weights += payload.len() as u64 - 4;
    counters.control += 11;
    counters.messages += 1;
    let peer = transport.exchange(MsgKind::Weights, level, &payload)?;
    let peer_agg = decode_rows(&peer, 1, agg.len())?;
    let peer_vec: Vec<Field255> = peer_agg.into_iter().map(|r| r[0]).collect();

    let counts = combine(&agg, &peer_vec, subs.len() as u64)?;
    Ok(HistogramOutput {
        counts,
        disqualified,
        bytes: counters,
    })
}

fn decode_rows(
    payload: &[u8],
    width: usize,
    expect: usize,
) -> Result<Vec<Vec<Field255>>, ProtocolError> {
    let mut r = Reader::new(payload);
    let count = r
        .u32()
        .map_err(|_| ProtocolError::Malformed(MsgKind::Weights, "missing count"))?
        as usize;
    if count != expect {
        return Err(ProtocolError::Malformed(
            MsgKind::Weights,
            "element count mismatch",
        ));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = Vec::with_capacity(width);
        for _ in 0..width {
            let bytes = r
                .take(Field255::BYTES)
                .map_err(|_| ProtocolError::Malformed(MsgKind::Weights, "truncated"))?;
            row.push(
                Field255::decode(bytes)
                    .map_err(|_| ProtocolError::Malformed(MsgKind::Weights, "bad element"))?,
            );
        }
        out.push(row);
    }
    r.finish()
        .map_err(|_| ProtocolError::Malformed(MsgKind::Weights, "trailing bytes"))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prg::FixedKeyPrg;
    use crate::transport::LocalPair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn run_pair(
        set: &CandidateSet,
        subs0: Vec<HistogramSubmission>,
        subs1: Vec<HistogramSubmission>,
        seed: Seed,
    ) -> (HistogramOutput, HistogramOutput) {
        let (mut t0, mut t1) = LocalPair::new();
        let set1 = set.clone();
        let h = std::thread::spawn(move || {
            run_histogram(1, &set1, &subs1, &seed, &FixedKeyPrg, &mut t1).unwrap()
        });
        let out0 = run_histogram(0, set, &subs0, &seed, &FixedKeyPrg, &mut t0).unwrap();
        (out0, h.join().unwrap())
    }

    fn plaintext_counts(inputs: &[BitString], set: &CandidateSet) -> Vec<u64> {
        set.strings()
            .iter()
            .map(|s| inputs.iter().filter(|a| *a == s).count() as u64)
            .collect()
    }

    #[test]
    fn leaf_payload_reconstructs() {
        let prg = FixedKeyPrg;
        let mut rng = ChaCha20Rng::seed_from_u64(80);
        let alpha = BitString::from_u64(0b1010, 4);
        let [s0, s1] = client_submit(&alpha, &mut rng, &prg);
        assert_eq!(s0.pp, s1.pp);
        // At σ = α the pair reconstructs to (1, κ); elsewhere to (0, 0).
        let y = idpf::eval_prefix(&s0.key, &s0.pp, &alpha, &prg)
            .add(idpf::eval_prefix(&s1.key, &s1.pp, &alpha, &prg));
        match y {
            GroupValue::LeafPair(one, kappa) => {
                assert_eq!(one, Field255::one());
                assert_ne!(kappa, Field255::zero());
            }
            other => panic!("unexpected payload {other:?}"),
        }
        let off = BitString::from_u64(0b1011, 4);
        let y = idpf::eval_prefix(&s0.key, &s0.pp, &off, &prg)
            .add(idpf::eval_prefix(&s1.key, &s1.pp, &off, &prg));
        assert!(y.is_zero());
    }

    #[test]
    fn submission_size_matches_formula() {
        let prg = FixedKeyPrg;
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        for bits in [1usize, 4, 16] {
            let alpha = BitString::from_u64(
                rng.gen::<u64>() & ((1u64 << bits) - 1),
                bits,
            );
            let [s0, _] = client_submit(&alpha, &mut rng, &prg);
            let actual = 8 * (idpf::serialize_key(&s0.key).len()
                + idpf::serialize_pp(&s0.pp).len()) as u64;
            assert_eq!(
                actual - idpf::serialization_overhead_bits(&s0.pp.groups),
                idpf::key_pp_content_bits(&s0.pp.groups)
            );
        }
    }

    #[test]
    fn histogram_example() {
        // Clients hold (001, 101, 111); S = {001, 010} → counts (1, 0).
        let mut rng = ChaCha20Rng::seed_from_u64(82);
        let inputs: Vec<BitString> = [0b001u64, 0b101, 0b111]
            .iter()
            .map(|&v| BitString::from_u64(v, 3))
            .collect();
        let set = CandidateSet::new(
            vec![BitString::from_u64(0b001, 3), BitString::from_u64(0b010, 3)],
            3,
        )
        .unwrap();
        let mut subs0 = Vec::new();
        let mut subs1 = Vec::new();
        for alpha in &inputs {
            let [a, b] = client_submit(alpha, &mut rng, &FixedKeyPrg);
            subs0.push(a);
            subs1.push(b);
        }
        let (out0, out1) = run_pair(&set, subs0, subs1, Seed::from_rng(&mut rng));
        assert_eq!(out0.counts, vec![1, 0]);
        assert_eq!(out1.counts, vec![1, 0]);
        assert_eq!(out0.disqualified, 0);
    }

    #[test]
    fn empty_candidate_set() {
        let mut rng = ChaCha20Rng::seed_from_u64(83);
        let set = CandidateSet::new(Vec::new(), 4).unwrap();
        let [a, b] = client_submit(&BitString::from_u64(3, 4), &mut rng, &FixedKeyPrg);
        let (out0, _) = run_pair(&set, vec![a], vec![b], Seed::from_rng(&mut rng));
        assert!(out0.counts.is_empty());
    }

    #[test]
    fn random_populations_match_plaintext() {
        let mut rng = ChaCha20Rng::seed_from_u64(84);
        for _ in 0..5 {
            let bits = rng.gen_range(2..=8);
            let c = rng.gen_range(1..=30);
            let m = rng.gen_range(1..=12usize).min(1 << bits);
            let inputs: Vec<BitString> = (0..c)
                .map(|_| BitString::from_u64(rng.gen::<u64>() & ((1 << bits) - 1), bits))
                .collect();
            let mut sigma = std::collections::HashSet::new();
            while sigma.len() < m {
                sigma.insert(BitString::from_u64(
                    rng.gen::<u64>() & ((1 << bits) - 1),
                    bits,
                ));
            }
            let set = CandidateSet::new(sigma.into_iter().collect(), bits).unwrap();
            let mut subs0 = Vec::new();
            let mut subs1 = Vec::new();
            for alpha in &inputs {
                let [a, b] = client_submit(alpha, &mut rng, &FixedKeyPrg);
                subs0.push(a);
                subs1.push(b);
            }
            let (out0, _) = run_pair(&set, subs0, subs1, Seed::from_rng(&mut rng));
            assert_eq!(out0.counts, plaintext_counts(&inputs, &set));
        }
    }

    #[test]
    fn order_independence() {
        let mut rng = ChaCha20Rng::seed_from_u64(85);
        let inputs: Vec<BitString> = [0b01u64, 0b01, 0b11]
            .iter()
            .map(|&v| BitString::from_u64(v, 2))
            .collect();
        let set =
            CandidateSet::new(vec![BitString::from_u64(0b01, 2)], 2).unwrap();
        let mut subs0 = Vec::new();
        let mut subs1 = Vec::new();
        for alpha in &inputs {
            let [a, b] = client_submit(alpha, &mut rng, &FixedKeyPrg);
            subs0.push(a);
            subs1.push(b);
        }
        let seed = Seed::from_rng(&mut rng);
        let (out_a, _) = run_pair(&set, subs0.clone(), subs1.clone(), seed);
        subs0.swap(0, 2);
        subs1.swap(0, 2);
        let (out_b, _) = run_pair(&set, subs0, subs1, seed);
        assert_eq!(out_a.counts, out_b.counts);
    }

    #[test]
    fn candidate_set_validation() {
        let a = BitString::from_u64(1, 3);
        assert!(CandidateSet::new(vec![a.clone(), a.clone()], 3).is_err());
        assert!(CandidateSet::new(vec![BitString::from_u64(1, 2)], 3).is_err());
    }
}
