// SPDX-License-Identifier: MPL-2.0

//! The client upload message and its validation.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! [version u8][nonce 16][key_len u16][key][pp_len u32][pp]
//! [corr: mask seed 16, inner count u16, (A,B) 16 octets per inner level,
//!        (A,B) 64 octets for the leaf level]
//! [pp digest 32]
//! ```
//!
//! The digest must equal SHA-256 of the pp bytes; servers recompute it on
//! ingest and use it for the cross-server equality check, so a client that
//! sends different public parameters to the two servers is disqualified
//! deterministically at upload.

use hh_core::codec::{put_u16, put_u32, CodecError, Reader};
use hh_core::field::{Field255, Field62, PrimeField};
use hh_core::idpf::{self, IdpfKey, PublicParams};
use hh_core::prg::Seed;
use hh_core::sketch::CorrShare;
use sha2::{Digest, Sha256};

pub const UPLOAD_VERSION: u8 = 1;

#[derive(Clone, Debug)]
pub struct UploadMessage {
    pub nonce: [u8; 16],
    pub key: IdpfKey,
    pub pp: PublicParams,
    pub corr: CorrShare,
    pub pp_digest: [u8; 32],
}

impl UploadMessage {
    pub fn new(nonce: [u8; 16], key: IdpfKey, pp: PublicParams, corr: CorrShare) -> Self {
        let pp_bytes = idpf::serialize_pp(&pp);
        let pp_digest = Sha256::digest(&pp_bytes).into();
        UploadMessage {
            nonce,
            key,
            pp,
            corr,
            pp_digest,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let key_bytes = idpf::serialize_key(&self.key);
        let pp_bytes = idpf::serialize_pp(&self.pp);
        let mut out = Vec::with_capacity(72 + key_bytes.len() + pp_bytes.len());
        out.push(UPLOAD_VERSION);
        out.extend_from_slice(&self.nonce);
        put_u16(&mut out, key_bytes.len() as u16);
        out.extend_from_slice(&key_bytes);
        put_u32(&mut out, pp_bytes.len() as u32);
        out.extend_from_slice(&pp_bytes);
        out.extend_from_slice(self.corr.mask_seed.as_bytes());
        put_u16(&mut out, self.corr.inner_ab.len() as u16);
        for (a, b) in &self.corr.inner_ab {
            a.encode(&mut out);
            b.encode(&mut out);
        }
        self.corr.leaf_ab.0.encode(&mut out);
        self.corr.leaf_ab.1.encode(&mut out);
        out.extend_from_slice(&self.pp_digest);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != UPLOAD_VERSION {
            return Err(CodecError::Version(version));
        }
        let nonce = r.array::<16>()?;
        let key_len = r.u16()? as usize;
        let key = idpf::deserialize_key(r.take(key_len)?)?;
        let pp_len = r.u32()? as usize;
        let pp_bytes = r.take(pp_len)?;
        let pp = idpf::deserialize_pp(pp_bytes)?;
        let mask_seed = Seed::from_block(r.array::<16>()?);
        let inner_count = r.u16()? as usize;
        let mut inner_ab = Vec::with_capacity(inner_count);
        for _ in 0..inner_count {
            let a = Field62::decode(r.take(Field62::BYTES)?)?;
            let b = Field62::decode(r.take(Field62::BYTES)?)?;
            inner_ab.push((a, b));
        }
        let leaf_a = Field255::decode(r.take(Field255::BYTES)?)?;
        let leaf_b = Field255::decode(r.take(Field255::BYTES)?)?;
        let pp_digest = r.array::<32>()?;
        r.finish()?;
        let computed: [u8; 32] = Sha256::digest(pp_bytes).into();
        if computed != pp_digest {
            return Err(CodecError::Invalid("pp digest mismatch"));
        }
        Ok(UploadMessage {
            nonce,
            key,
            pp,
            corr: CorrShare {
                mask_seed,
                inner_ab,
                leaf_ab: (leaf_a, leaf_b),
            },
            pp_digest,
        })
    }
}
