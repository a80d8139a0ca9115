// SPDX-License-Identifier: MPL-2.0

//! Round-message transport abstraction used by the protocol drivers.
//!
//! The aggregate phase is a lock-step sequence of framed exchanges: both
//! servers send a payload for the same `(kind, level)` slot and receive the
//! peer's. Any disagreement on the slot is a desynchronization and aborts the
//! run. The network crate implements this over TCP; [`LocalPair`] runs both
//! roles in-process for tests and the simulator.

use std::sync::mpsc::{channel, Receiver, Sender};
use thiserror::Error;

/// Round-message discriminator. On the wire this is the frame's type octet.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum MsgKind {
    Hello = 1,
    Nonce = 2,
    Roster = 3,
    SketchR1 = 4,
    SketchR2 = 5,
    Weights = 6,
    Reject = 7,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol desync: sent {sent:?} level {sent_level}, peer sent {got:?} level {got_level}")]
    Desync {
        sent: MsgKind,
        sent_level: u16,
        got: u8,
        got_level: u16,
    },
    #[error("malformed peer message in {0:?}: {1}")]
    Malformed(MsgKind, &'static str),
    #[error("peer aborted: {0}")]
    PeerAbort(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("{disqualified} of {total} clients disqualified, over the abort threshold")]
    TooManyDisqualified { disqualified: usize, total: usize },
    #[error("configuration error: {0}")]
    Config(String),
}

/// Synchronous framed exchange with the peer server.
pub trait RoundTransport {
    fn exchange(
        &mut self,
        kind: MsgKind,
        level: u16,
        payload: &[u8],
    ) -> Result<Vec<u8>, ProtocolError>;
}

/// Sent-byte tallies per message category (payload bytes only; per-message
/// headers and framing are tallied under `control`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ByteCounters {
    pub sketch_r1: u64,
    pub sketch_r2: u64,
    pub weights: u64,
    pub control: u64,
    pub messages: u64,
}

impl ByteCounters {
    pub fn total(&self) -> u64 {
        self.sketch_r1 + self.sketch_r2 + self.weights + self.control
    }
}

/// In-process transport: a pair of connected endpoints over channels.
pub struct LocalPair {
    tx: Sender<(u8, u16, Vec<u8>)>,
    rx: Receiver<(u8, u16, Vec<u8>)>,
}

impl LocalPair {
    pub fn new() -> (LocalPair, LocalPair) {
        let (tx0, rx1) = channel();
        let (tx1, rx0) = channel();
        (LocalPair { tx: tx0, rx: rx0 }, LocalPair { tx: tx1, rx: rx1 })
    }
}

impl RoundTransport for LocalPair {
    fn exchange(
        &mut self,
        kind: MsgKind,
        level: u16,
        payload: &[u8],
    ) -> Result<Vec<u8>, ProtocolError> {
        self.tx
            .send((kind as u8, level, payload.to_vec()))
            .map_err(|_| ProtocolError::Transport("peer endpoint dropped".into()))?;
        let (got, got_level, body) = self
            .rx
            .recv()
            .map_err(|_| ProtocolError::Transport("peer endpoint dropped".into()))?;
        if got != kind as u8 || got_level != level {
            return Err(ProtocolError::Desync {
                sent: kind,
                sent_level: level,
                got,
                got_level,
            });
        }
        Ok(body)
    }
}
