// SPDX-License-Identifier: MPL-2.0

//! Server engine: upload ingest, roster reconciliation, shared-seed
//! establishment, and the aggregate phase shared by the real server binary
//! and the simulator.

use crate::config::{Mode, RunConfig};
use crate::spool::{SpoolWriter, SubmissionStore};
use crate::upload::UploadMessage;
use crate::wire::{self, read_frame, write_frame, TcpExchange, TYPE_UPLOAD, TYPE_UPLOAD_ACK};
use hh_core::heavy::{self, HeavyOutput};
use hh_core::histogram::{self, CandidateSet, HistogramOutput};
use hh_core::idpf::GroupDesc;
use hh_core::prg::{FixedKeyPrg, Seed};
use hh_core::transport::{MsgKind, ProtocolError, RoundTransport};
use rand::RngCore;
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

pub const PROTO_VERSION: u8 = 1;

/// Both servers derive the run's sketch seed from the sorted nonce pair, so
/// arrival order does not matter.
pub fn establish_shared_seed(local: &[u8; 16], peer: &[u8; 16]) -> Seed {
    let (lo, hi) = if local <= peer {
        (local, peer)
    } else {
        (peer, local)
    };
    let mut h = Sha256::new();
    h.update(b"shared-seed");
    h.update(lo);
    h.update(hi);
    let digest = h.finalize();
    let mut block = [0u8; 16];
    block.copy_from_slice(&digest[..16]);
    Seed::from_block(block)
}

/// The per-level payload groups a submission must carry for a mode.
pub fn expected_groups(mode: Mode, bits: usize) -> Vec<GroupDesc> {
    let mut groups = vec![
        match mode {
            Mode::Heavy => GroupDesc::InnerPair,
            Mode::Histogram => GroupDesc::Trivial,
        };
        bits - 1
    ];
    groups.push(GroupDesc::LeafPair);
    groups
}

/// Structural checks applied before a submission enters the store.
pub fn validate_upload(cfg: &RunConfig, msg: &UploadMessage) -> Result<(), &'static str> {
    if msg.pp.depth() != cfg.bits {
        return Err("wrong tree depth");
    }
    if msg.pp.groups != expected_groups(cfg.mode, cfg.bits) {
        return Err("wrong payload groups");
    }
    let expect_inner = match cfg.mode {
        Mode::Heavy => cfg.bits - 1,
        Mode::Histogram => 0,
    };
    if msg.corr.inner_ab.len() != expect_inner {
        return Err("wrong correlated-randomness shape");
    }
    Ok(())
}

/// Sorted `(nonce, pp digest)` list for the roster exchange.
pub fn roster_payload(store: &SubmissionStore) -> Vec<u8> {
    let mut entries: Vec<(&[u8; 16], &[u8; 32])> = store
        .entries()
        .iter()
        .map(|m| (&m.nonce, &m.pp_digest))
        .collect();
    entries.sort();
    let mut out = Vec::with_capacity(4 + entries.len() * 48);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (nonce, digest) in entries {
        out.extend_from_slice(nonce);
        out.extend_from_slice(digest);
    }
    out
}

pub struct Reconciliation {
    /// Store indices forming the roster, ordered by nonce; identical on both
    /// servers.
    pub roster: Vec<usize>,
    /// Clients whose pp digests differ between the servers.
    pub upload_disqualified: usize,
    /// Clients seen by only one server.
    pub unmatched: usize,
}

pub fn reconcile(store: &SubmissionStore, peer_payload: &[u8]) -> Result<Reconciliation, ProtocolError> {
    if peer_payload.len() < 4 {
        return Err(ProtocolError::Malformed(MsgKind::Roster, "short payload"));
    }
    let count = u32::from_le_bytes(peer_payload[..4].try_into().unwrap()) as usize;
    if peer_payload.len() != 4 + count * 48 {
        return Err(ProtocolError::Malformed(MsgKind::Roster, "bad length"));
    }
    let mut peer: Vec<([u8; 16], [u8; 32])> = (0..count)
        .map(|i| {
            let base = 4 + i * 48;
            (
                peer_payload[base..base + 16].try_into().unwrap(),
                peer_payload[base + 16..base + 48].try_into().unwrap(),
            )
        })
        .collect();
    peer.sort();

    let mut local: Vec<(usize, [u8; 16], [u8; 32])> = store
        .entries()
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m.nonce, m.pp_digest))
        .collect();
    local.sort_by_key(|&(_, nonce, _)| nonce);

    let mut roster = Vec::new();
    let mut upload_disqualified = 0;
    let mut unmatched = 0;
    let (mut i, mut j) = (0, 0);
    while i < local.len() && j < peer.len() {
        match local[i].1.cmp(&peer[j].0) {
            std::cmp::Ordering::Less => {
                unmatched += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                unmatched += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                if local[i].2 == peer[j].1 {
                    roster.push(local[i].0);
                } else {
                    upload_disqualified += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    unmatched += (local.len() - i) + (peer.len() - j);
    Ok(Reconciliation {
        roster,
        upload_disqualified,
        unmatched,
    })
}

#[derive(Debug)]
pub enum ProtocolOutput {
    Heavy(HeavyOutput),
    Histogram(HistogramOutput),
}

#[derive(Debug)]
pub struct AggregateOutcome {
    pub output: ProtocolOutput,
    pub roster_len: usize,
    pub upload_disqualified: usize,
    pub unmatched: usize,
}

/// Run the aggregate phase over an established peer connection. The `Hello`
/// handshake happens here (outside the lock-step transport) so a listening
/// server can identify the peer connection by its first frame;
/// `pre_hello` carries that already-read frame when present.
#[allow(clippy::too_many_arguments)]
pub fn run_aggregate(
    role: u8,
    stream: TcpStream,
    cfg: &RunConfig,
    candidates: Option<&CandidateSet>,
    store: &SubmissionStore,
    local_nonce: [u8; 16],
    noise_rng: &mut dyn RngCore,
    pre_hello: Option<(u8, u16, Vec<u8>)>,
) -> Result<AggregateOutcome, ProtocolError> {
    let mut exchange = TcpExchange::new(
        stream.try_clone().map_err(|e| ProtocolError::Transport(e.to_string()))?,
        role,
    );
    match run_aggregate_inner(
        role, stream, cfg, candidates, store, local_nonce, noise_rng, pre_hello,
    ) {
        Ok(out) => Ok(out),
        Err(e) => {
            exchange.send_abort(&e.to_string());
            Err(e)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_aggregate_inner(
    role: u8,
    mut stream: TcpStream,
    cfg: &RunConfig,
    candidates: Option<&CandidateSet>,
    store: &SubmissionStore,
    local_nonce: [u8; 16],
    noise_rng: &mut dyn RngCore,
    pre_hello: Option<(u8, u16, Vec<u8>)>,
) -> Result<AggregateOutcome, ProtocolError> {
    let wrap = |e: std::io::Error| ProtocolError::Transport(e.to_string());

    // Hello: protocol version, role, config digest.
    let mut hello = Vec::with_capacity(34);
    hello.push(PROTO_VERSION);
    hello.push(role);
    hello.extend_from_slice(&cfg.digest());
    let peer_hello = if role == 0 {
        write_frame(&mut stream, MsgKind::Hello as u8, 0, &hello).map_err(wrap)?;
        read_frame(&mut stream).map_err(wrap)?
    } else {
        let got = match pre_hello {
            Some(f) => f,
            None => read_frame(&mut stream).map_err(wrap)?,
        };
        write_frame(&mut stream, MsgKind::Hello as u8, 0, &hello).map_err(wrap)?;
        got
    };
    if peer_hello.0 == wire::TYPE_ABORT {
        return Err(ProtocolError::PeerAbort(
            String::from_utf8_lossy(&peer_hello.2).into_owned(),
        ));
    }
    if peer_hello.0 != MsgKind::Hello as u8 || peer_hello.2.len() != 34 {
        return Err(ProtocolError::Malformed(MsgKind::Hello, "bad hello frame"));
    }
    if peer_hello.2[0] != PROTO_VERSION {
        return Err(ProtocolError::Config("protocol version mismatch".into()));
    }
    if peer_hello.2[1] != 1 - role {
        return Err(ProtocolError::Config("both servers claim the same role".into()));
    }
    if peer_hello.2[2..] != cfg.digest() {
        return Err(ProtocolError::Config(
            "configuration digest mismatch between servers".into(),
        ));
    }

    let mut transport = TcpExchange::new(stream, role);

    // Nonces and the shared sketch seed.
    let peer_nonce = transport.exchange(MsgKind::Nonce, 0, &local_nonce)?;
    let peer_nonce: [u8; 16] = peer_nonce
        .try_into()
        .map_err(|_| ProtocolError::Malformed(MsgKind::Nonce, "bad nonce length"))?;
    let shared = establish_shared_seed(&local_nonce, &peer_nonce);

    // Roster reconciliation.
    let peer_roster = transport.exchange(MsgKind::Roster, 0, &roster_payload(store))?;
    let rec = reconcile(store, &peer_roster)?;

    let prg = FixedKeyPrg;
    let output = match cfg.mode {
        Mode::Heavy => {
            let subs: Vec<heavy::Submission> = rec
                .roster
                .iter()
                .map(|&i| {
                    let m = &store.entries()[i];
                    heavy::Submission {
                        key: m.key,
                        pp: m.pp.clone(),
                        corr: m.corr.clone(),
                    }
                })
                .collect();
            ProtocolOutput::Heavy(heavy::run_heavy_hitters(
                role,
                &cfg.heavy_config(),
                &subs,
                &shared,
                noise_rng,
                &prg,
                &mut transport,
            )?)
        }
        Mode::Histogram => {
            let set = candidates.ok_or_else(|| {
                ProtocolError::Config("histogram mode needs a candidate set".into())
            })?;
            let subs: Vec<histogram::HistogramSubmission> = rec
                .roster
                .iter()
                .map(|&i| {
                    let m = &store.entries()[i];
                    histogram::HistogramSubmission {
                        key: m.key,
                        pp: m.pp.clone(),
                        corr: m.corr.clone(),
                    }
                })
                .collect();
            ProtocolOutput::Histogram(histogram::run_histogram(
                role,
                set,
                &subs,
                &shared,
                &prg,
                &mut transport,
            )?)
        }
    };

    Ok(AggregateOutcome {
        output,
        roster_len: rec.roster.len(),
        upload_disqualified: rec.upload_disqualified,
        unmatched: rec.unmatched,
    })
}

pub struct IngestOutcome {
    pub store: SubmissionStore,
    pub rejected: usize,
    /// Role 1 only: the peer connection that arrived during ingest, with its
    /// already-read Hello frame.
    pub pending_peer: Option<(TcpStream, (u8, u16, Vec<u8>))>,
}

/// Accept client uploads until `cfg.clients` unique valid submissions are
/// stored. Connections are handled concurrently; each upload gets a one-octet
/// ack (0 = accepted, 1 = malformed, 2 = duplicate nonce, 3 = roster full).
/// A `Hello` frame identifies the peer server: the connection is parked and
/// returned for the aggregate phase.
pub fn ingest(
    listener: &TcpListener,
    cfg: &RunConfig,
    spool_path: Option<&Path>,
) -> std::io::Result<IngestOutcome> {
    struct Shared {
        store: Mutex<(SubmissionStore, Option<SpoolWriter>)>,
        accepted: AtomicUsize,
        rejected: AtomicUsize,
    }
    let spool = match spool_path {
        Some(p) => Some(SpoolWriter::open(p)?),
        None => None,
    };
    let shared = Arc::new(Shared {
        store: Mutex::new((SubmissionStore::new(), spool)),
        accepted: AtomicUsize::new(0),
        rejected: AtomicUsize::new(0),
    });
    let (peer_tx, peer_rx) = std::sync::mpsc::channel();
    let mut workers = Vec::new();

    // Poll-accept so the loop notices the roster filling up while idle.
    listener.set_nonblocking(true)?;
    while (shared.accepted.load(Ordering::SeqCst) as u64) < cfg.clients {
        let (mut conn, _) = match listener.accept() {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(2));
                continue;
            }
            Err(e) => {
                listener.set_nonblocking(false)?;
                return Err(e);
            }
        };
        conn.set_nonblocking(false)?;
        let shared = Arc::clone(&shared);
        let cfg = cfg.clone();
        let peer_tx = peer_tx.clone();
        workers.push(std::thread::spawn(move || {
            let _ = conn.set_read_timeout(Some(Duration::from_secs(30)));
            let first = match read_frame(&mut conn) {
                Ok(f) => f,
                Err(_) => return,
            };
            if first.0 == MsgKind::Hello as u8 {
                let _ = conn.set_read_timeout(None);
                let _ = peer_tx.send((conn, first));
                return;
            }
            if first.0 != TYPE_UPLOAD {
                let _ = write_frame(&mut conn, wire::TYPE_ABORT, 0, b"expected upload");
                return;
            }
            let status = match UploadMessage::decode(&first.2) {
                Ok(msg) => match validate_upload(&cfg, &msg) {
                    Ok(()) => {
                        let mut guard = shared.store.lock().unwrap();
                        if (shared.accepted.load(Ordering::SeqCst) as u64) >= cfg.clients {
                            3
                        } else if guard.0.insert(msg.clone()) {
                            if let Some(spool) = guard.1.as_mut() {
                                let _ = spool.append(&msg.encode());
                            }
                            shared.accepted.fetch_add(1, Ordering::SeqCst);
                            0
                        } else {
                            2
                        }
                    }
                    Err(_) => 1,
                },
                Err(_) => 1,
            };
            if status != 0 {
                shared.rejected.fetch_add(1, Ordering::SeqCst);
            }
            let _ = write_frame(&mut conn, TYPE_UPLOAD_ACK, 0, &[status]);
            let _ = conn.flush();
        }));
    }
    listener.set_nonblocking(false)?;
    for w in workers {
        let _ = w.join();
    }
    drop(peer_tx);
    let pending_peer = peer_rx.try_recv().ok();
    let shared = Arc::try_unwrap(shared)
        .unwrap_or_else(|_| unreachable!("all ingest workers joined"));
    let rejected = shared.rejected.load(Ordering::SeqCst);
    let (store, _) = shared.store.into_inner().unwrap();
    Ok(IngestOutcome {
        store,
        rejected,
        pending_peer,
    })
}

/// Role 1 side of peer establishment after ingest: use the parked connection
/// or accept a fresh one whose first frame is Hello.
pub fn await_peer(
    listener: &TcpListener,
    pending: Option<(TcpStream, (u8, u16, Vec<u8>))>,
) -> std::io::Result<(TcpStream, (u8, u16, Vec<u8>))> {
    if let Some(p) = pending {
        return Ok(p);
    }
    loop {
        let (mut conn, _) = listener.accept()?;
        conn.set_read_timeout(Some(Duration::from_secs(60)))?;
        if let Ok(frame) = read_frame(&mut conn) {
            if frame.0 == MsgKind::Hello as u8 {
                conn.set_read_timeout(None)?;
                return Ok((conn, frame));
            }
        }
    }
}
