// SPDX-License-Identifier: MPL-2.0

//! Client side: build the two per-server upload messages for an input string
//! and deliver them over TCP.

use crate::config::Mode;
use crate::upload::UploadMessage;
use crate::wire::{read_frame, write_frame, TYPE_UPLOAD, TYPE_UPLOAD_ACK};
use hh_core::bits::BitString;
use hh_core::heavy;
use hh_core::histogram;
use hh_core::prg::FixedKeyPrg;
use rand::RngCore;
use std::net::TcpStream;
use std::time::Duration;

/// Build the pair of uploads for `alpha`. One fresh nonce binds the two.
pub fn build_uploads(mode: Mode, alpha: &BitString, rng: &mut dyn RngCore) -> [UploadMessage; 2] {
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    match mode {
        Mode::Heavy => heavy::client_submissions(alpha, rng, &FixedKeyPrg)
            .map(|s| UploadMessage::new(nonce, s.key, s.pp, s.corr)),
        Mode::Histogram => histogram::client_submit(alpha, rng, &FixedKeyPrg)
            .map(|s| UploadMessage::new(nonce, s.key, s.pp, s.corr)),
    }
}

/// Send one upload and wait for the acknowledgment.
pub fn deliver(addr: &str, msg: &UploadMessage) -> Result<(), String> {
    let mut stream = TcpStream::connect(addr).map_err(|e| format!("connect {addr}: {e}"))?;
    stream
        .set_read_timeout(Some(Duration::from_secs(30)))
        .map_err(|e| e.to_string())?;
    write_frame(&mut stream, TYPE_UPLOAD, 0, &msg.encode()).map_err(|e| e.to_string())?;
    let (kind, _, payload) = read_frame(&mut stream).map_err(|e| e.to_string())?;
    if kind != TYPE_UPLOAD_ACK || payload.first() != Some(&0) {
        return Err(format!(
            "upload rejected by {addr} (status {:?})",
            payload.first()
        ));
    }
    Ok(())
}

/// Submit `alpha` to both servers.
pub fn submit(
    mode: Mode,
    alpha: &BitString,
    server0: &str,
    server1: &str,
    rng: &mut dyn RngCore,
) -> Result<(), String> {
    let [m0, m1] = build_uploads(mode, alpha, rng);
    deliver(server0, &m0)?;
    deliver(server1, &m1)
}
