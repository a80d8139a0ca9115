// SPDX-License-Identifier: MPL-2.0

//! Core cryptography and protocol logic for two-server private heavy hitters.
//!
//! The building blocks, bottom up:
//!
//! * [`field`] — fixed-width prime fields: a 62-bit field for the inner levels
//!   of the prefix tree, a 255-bit field for the leaves, and a small field for
//!   statistical tests.
//! * [`prg`] — a length-doubling PRG built from fixed-key AES in a
//!   Matyas–Meyer–Oseas compression mode, the seed-to-group conversion it
//!   drives, and a keyed stream for correlated randomness.
//! * [`idpf`] — incremental distributed point functions: compact two-party
//!   secret sharing of the node labels of a binary tree with one non-zero
//!   root-to-leaf path, evaluable one input bit at a time.
//! * [`sketch`] — malicious-secure verification that a secret-shared vector is
//!   a 0/1 unit vector, via randomized inner-product sketches and
//!   client-provided correlated randomness.
//! * [`histogram`] — private subset histograms over a server-held candidate
//!   set.
//! * [`heavy`] — the prefix-count search and the two-server heavy-hitters
//!   protocol driver.
//! * [`dp`] — discrete Laplace noising and the differential-privacy budget
//!   calculator.
//! * [`extract`] — a test-only harness that recovers the special input of a
//!   key pair from a recorded oracle transcript (requires the `harness`
//!   feature, on by default, disabled in release binaries).

pub mod bits;
pub mod codec;
pub mod dp;
#[cfg(feature = "harness")]
pub mod extract;
pub mod field;
pub mod heavy;
pub mod histogram;
pub mod idpf;
pub mod prg;
pub mod sketch;
pub mod transport;
