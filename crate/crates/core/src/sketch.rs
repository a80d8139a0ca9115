// SPDX-License-Identifier: MPL-2.0

//! Malicious-secure sketching: two servers holding additive shares of a
//! client vector pair `(v̄, v̄*)` check that `v̄` is a 0/1 vector of weight at
//! most one and that `v̄* = κ·v̄` for the client's secret authenticator κ,
//! without learning anything else.
//!
//! The servers share a uniform vector `r̄` and its squares `r̄*`, compute the
//! three inner products `z = ⟨r̄,v̄⟩`, `z* = ⟨r̄*,v̄⟩`, `z** = ⟨r̄,v̄*⟩`, and
//! run a two-round client-aided secure computation of
//!
//! ```text
//! (z² − z*) + (κ·z − z**)
//! ```
//!
//! accepting iff the result is zero. The client supplies additive shares of
//! random masks `a, b, c` (expanded from one seed per server) and of the
//! polynomial coefficients `A = −2a + κ` and `B = a² + b − aκ + c`. Round 1
//! exchanges the masked inputs `(z+a, z*+b, z**+c)`; round 2 exchanges shares
//! of `Z² − Z* − Z** + A·Z + B`, with the public monomials charged to server
//! 0. Four field elements cross the wire per server per check.

use crate::field::{Field255, Field62, PrimeField};
use crate::prg::{KeyedPrf, Seed};
use rand::RngCore;

const TAG_MASK_A: &[u8] = b"corr-a";
const TAG_MASK_B: &[u8] = b"corr-b";
const TAG_MASK_C: &[u8] = b"corr-c";
const TAG_SKETCH_CLIENT: &[u8] = b"sketch";
const TAG_SKETCH_R: &[u8] = b"sketch-r";

/// One server's share of a client's correlated randomness, for every level of
/// the tree: a mask seed expanding to `(a, b, c)` shares per level, plus
/// explicit `(A, B)` shares — in the inner field for levels `1..n-1` and in
/// the leaf field for level `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrShare {
    pub mask_seed: Seed,
    pub inner_ab: Vec<(Field62, Field62)>,
    pub leaf_ab: (Field255, Field255),
}

/// This server's `(a, b, c)` mask shares for one level.
pub fn mask_shares<F: PrimeField>(mask: &KeyedPrf, level: u16) -> (F, F, F) {
    (
        mask.field(TAG_MASK_A, level as u64),
        mask.field(TAG_MASK_B, level as u64),
        mask.field(TAG_MASK_C, level as u64),
    )
}

/// Client side: fresh authenticator κ and the two servers' `(A, B)` shares
/// for one level, given the two mask seeds (whose streams define `a, b, c`).
pub fn encode_level<F: PrimeField>(
    mask0: &KeyedPrf,
    mask1: &KeyedPrf,
    level: u16,
    rng: &mut dyn RngCore,
) -> (F, [(F, F); 2]) {
    let (a0, b0, c0) = mask_shares::<F>(mask0, level);
    let (a1, b1, c1) = mask_shares::<F>(mask1, level);
    let a = a0.add(a1);
    let b = b0.add(b1);
    let c = c0.add(c1);
    let kappa = F::random(rng);
    // A = −2a + κ;  B = a² + b − aκ + c
    let big_a = kappa.sub(a.add(a));
    let big_b = a.mul(a).add(b).sub(a.mul(kappa)).add(c);
    let a_split = F::random(rng);
    let b_split = F::random(rng);
    (
        kappa,
        [
            (a_split, b_split),
            (big_a.sub(a_split), big_b.sub(b_split)),
        ],
    )
}

/// The shared sketch vector `r̄` and its squares `r̄*` for one (client, level)
/// pair. Both servers derive identical vectors from the run's shared seed.
pub fn derive_sketch_randomness<F: PrimeField>(
    shared_seed: &Seed,
    client: u64,
    level: u16,
    m: usize,
) -> (Vec<F>, Vec<F>) {
    let sub = KeyedPrf::new(shared_seed).subseed(TAG_SKETCH_CLIENT, client << 16 | level as u64);
    let prf = KeyedPrf::new(&sub);
    let r: Vec<F> = (0..m).map(|i| prf.field(TAG_SKETCH_R, i as u64)).collect();
    let r_sq = r.iter().map(|x| x.mul(*x)).collect();
    (r, r_sq)
}

/// The three local inner products `(z_b, z*_b, z**_b)`.
pub fn compute_locals<F: PrimeField>(v: &[F], v_star: &[F], r: &[F], r_sq: &[F]) -> (F, F, F) {
    assert!(
        v.len() == v_star.len() && v.len() == r.len() && v.len() == r_sq.len(),
        "sketch dimension mismatch"
    );
    let mut z = F::zero();
    let mut z_star = F::zero();
    let mut z_star2 = F::zero();
    for i in 0..v.len() {
        z = z.add(r[i].mul(v[i]));
        z_star = z_star.add(r_sq[i].mul(v[i]));
        z_star2 = z_star2.add(r[i].mul(v_star[i]));
    }
    (z, z_star, z_star2)
}

/// Round-1 message: the locals masked by this server's `(a, b, c)` shares.
pub fn round1<F: PrimeField>(locals: (F, F, F), masks: (F, F, F)) -> [F; 3] {
    [
        locals.0.add(masks.0),
        locals.1.add(masks.1),
        locals.2.add(masks.2),
    ]
}

/// Round-2 message: this server's additive share of
/// `Z² − Z* − Z** + A·Z + B`, the public monomials counted once (server 0).
pub fn round2_share<F: PrimeField>(party: u8, z_pub: [F; 3], ab: (F, F)) -> F {
    let [z, z_star, z_star2] = z_pub;
    let mut share = ab.0.mul(z).add(ab.1);
    if party == 0 {
        share = share.add(z.mul(z)).sub(z_star).sub(z_star2);
    }
    share
}

/// Accept iff the two round-2 shares sum to zero. Rejection is a protocol
/// outcome, not an error.
pub fn decide<F: PrimeField>(share0: F, share1: F) -> bool {
    share0.add(share1) == F::zero()
}

/// Run the whole check locally over both parties' shares — used by tests and
/// by the protocol drivers once the round messages have been exchanged.
pub fn verify_vectors<F: PrimeField>(
    v_shares: [&[F]; 2],
    v_star_shares: [&[F]; 2],
    masks: [(F, F, F); 2],
    ab: [(F, F); 2],
    r: &[F],
    r_sq: &[F],
) -> bool {
    let mut msgs = [[F::zero(); 3]; 2];
    for p in 0..2 {
        let locals = compute_locals(v_shares[p], v_star_shares[p], r, r_sq);
        msgs[p] = round1(locals, masks[p]);
    }
    let z_pub = [
        msgs[0][0].add(msgs[1][0]),
        msgs[0][1].add(msgs[1][1]),
        msgs[0][2].add(msgs[1][2]),
    ];
    decide(round2_share(0, z_pub, ab[0]), round2_share(1, z_pub, ab[1]))
}

/// Distribution probe for server-side additive offsets on the masked inputs
/// (test scaffolding): runs one honest instance with `(Δ, Δ*, Δ**)` applied
/// to the reconstructed round-1 values and returns the check value, which is
/// `κΔ + 2·r_i·Δ + Δ² − Δ* − Δ**` over the fresh honest randomness.
pub fn offset_attack_value<F: PrimeField>(
    delta: F,
    delta_star: F,
    delta_star2: F,
    rng: &mut dyn RngCore,
) -> F {
    let kappa = F::random(rng);
    let a = F::random(rng);
    let b = F::random(rng);
    let c = F::random(rng);
    let r_i = F::random(rng);
    // Honest weight-one vector: z = r_i, z* = r_i², z** = κ·r_i.
    let z = r_i;
    let z_star = r_i.mul(r_i);
    let z_star2 = kappa.mul(r_i);
    let big_a = kappa.sub(a.add(a));
    let big_b = a.mul(a).add(b).sub(a.mul(kappa)).add(c);
    let zp = z.add(a).add(delta);
    let zp_star = z_star.add(b).add(delta_star);
    let zp_star2 = z_star2.add(c).add(delta_star2);
    zp.mul(zp)
        .sub(zp_star)
        .sub(zp_star2)
        .add(big_a.mul(zp))
        .add(big_b)
}
