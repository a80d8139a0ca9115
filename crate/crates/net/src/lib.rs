// SPDX-License-Identifier: MPL-2.0

//! The two-server system shell: wire protocol, upload persistence, peer
//! transport, server engine, client submission, and the in-process simulator.
//!
//! # Wire frames
//!
//! Every message on every connection is one frame:
//!
//! ```text
//! [length: u32 LE][type: u8][level: u16 LE][payload]
//! ```
//!
//! where `length = 3 + payload length` (covers type and level). Types 1–7 are
//! the aggregate-phase round messages, 15 is an abort notice (payload UTF-8
//! reason), 16/17 the client upload and its acknowledgment.
//!
//! # Aggregate phase
//!
//! After ingest, server 0 dials server 1 and the two run, in lock step:
//! `Hello` (protocol version, role, config digest), `Nonce` (fresh 16-octet
//! nonce each; the shared sketch seed is a hash of the sorted pair), `Roster`
//! (sorted `(nonce, pp-digest)` lists; the intersection with matching digests
//! is the client roster, digest mismatches are disqualified at upload), then
//! the per-level rounds driven by the protocol core.

pub mod client;
pub mod config;
pub mod engine;
pub mod report;
pub mod sim;
pub mod spool;
pub mod upload;
pub mod wire;
pub mod zipf;

pub use config::{Mode, RunConfig};
pub use report::Report;
