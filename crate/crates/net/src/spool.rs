// SPDX-License-Identifier: MPL-2.0

//! Append-only on-disk spool of client uploads, so the aggregate phase can
//! restart from persisted submissions.
//!
//! Records are `[u32 LE length][upload bytes]`. Replay reads complete frames
//! and stops at a truncated tail (a crash mid-append loses only the partial
//! record). Duplicate client nonces are rejected both at ingest and replay.

use crate::upload::UploadMessage;
use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::Path;

pub struct SpoolWriter {
    file: File,
}

impl SpoolWriter {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        Ok(SpoolWriter {
            file: OpenOptions::new().create(true).append(true).open(path)?,
        })
    }

    pub fn append(&mut self, record: &[u8]) -> std::io::Result<()> {
        self.file.write_all(&(record.len() as u32).to_le_bytes())?;
        self.file.write_all(record)?;
        self.file.flush()
    }
}

/// In-memory submission store, deduplicated by nonce.
#[derive(Default)]
pub struct SubmissionStore {
    entries: Vec<UploadMessage>,
    nonces: HashSet<[u8; 16]>,
}

impl SubmissionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert; false when the nonce is a duplicate.
    pub fn insert(&mut self, msg: UploadMessage) -> bool {
        if !self.nonces.insert(msg.nonce) {
            return false;
        }
        self.entries.push(msg);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[UploadMessage] {
        &self.entries
    }
}

pub struct ReplayOutcome {
    pub store: SubmissionStore,
    /// Complete frames that failed to decode or duplicated a nonce.
    pub rejected: usize,
    /// True when the file ended in a partial record (crash tail).
    pub truncated_tail: bool,
}

/// Rebuild the store from a spool file.
pub fn replay(path: &Path) -> std::io::Result<ReplayOutcome> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut store = SubmissionStore::new();
    let mut rejected = 0;
    let mut truncated_tail = false;
    loop {
        let mut len = [0u8; 4];
        match reader.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e),
        }
        let len = u32::from_le_bytes(len) as usize;
        let mut body = vec![0u8; len];
        if reader.read_exact(&mut body).is_err() {
            truncated_tail = true;
            break;
        }
        match UploadMessage::decode(&body) {
            Ok(msg) => {
                if !store.insert(msg) {
                    rejected += 1;
                }
            }
            Err(_) => rejected += 1,
        }
    }
    Ok(ReplayOutcome {
        store,
        rejected,
        truncated_tail,
    })
}
