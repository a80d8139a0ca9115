// SPDX-License-Identifier: MPL-2.0

//! Frame IO and the TCP peer transport.

use hh_core::transport::{MsgKind, ProtocolError, RoundTransport};
use std::io::{Read, Write};
use std::net::TcpStream;

/// Frame header bytes beyond the payload: 4 length + 1 type + 2 level.
pub const FRAME_OVERHEAD: usize = 7;

/// Abort notice; payload is a UTF-8 reason.
pub const TYPE_ABORT: u8 = 15;
/// Client submission.
pub const TYPE_UPLOAD: u8 = 16;
/// Upload acknowledgment; payload is one status octet (0 = accepted).
pub const TYPE_UPLOAD_ACK: u8 = 17;

/// Upper bound on accepted frame payloads; anything bigger is malformed.
pub const MAX_FRAME: u32 = 64 << 20;

pub fn write_frame(
    w: &mut impl Write,
    kind: u8,
    level: u16,
    payload: &[u8],
) -> std::io::Result<()> {
    let len = payload.len() as u32 + 3;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(&level.to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read) -> std::io::Result<(u8, u16, Vec<u8>)> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len);
    if len < 3 || len > MAX_FRAME {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("invalid frame length {len}"),
        ));
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head)?;
    let level = u16::from_le_bytes([head[1], head[2]]);
    let mut payload = vec![0u8; len as usize - 3];
    r.read_exact(&mut payload)?;
    Ok((head[0], level, payload))
}

/// Synchronous peer transport over one TCP stream. Role 0 sends first and
/// then reads; role 1 reads first — the fixed order keeps large simultaneous
/// sends from stalling on full socket buffers.
pub struct TcpExchange {
    stream: TcpStream,
    role: u8,
}

impl TcpExchange {
    pub fn new(stream: TcpStream, role: u8) -> Self {
        // Round frames are small and strictly request/response; Nagle's
        // algorithm would add a delayed-ACK stall to every level.
        let _ = stream.set_nodelay(true);
        TcpExchange { stream, role }
    }

    /// Send a best-effort abort notice to the peer.
    pub fn send_abort(&mut self, reason: &str) {
        let _ = write_frame(&mut self.stream, TYPE_ABORT, 0, reason.as_bytes());
    }

    fn send(&mut self, kind: MsgKind, level: u16, payload: &[u8]) -> Result<(), ProtocolError> {
        write_frame(&mut self.stream, kind as u8, level, payload)
            .map_err(|e| ProtocolError::Transport(e.to_string()))
    }

    fn recv(&mut self, kind: MsgKind, level: u16) -> Result<Vec<u8>, ProtocolError> {
        let (got, got_level, payload) =
            read_frame(&mut self.stream).map_err(|e| ProtocolError::Transport(e.to_string()))?;
        if got == TYPE_ABORT {
            return Err(ProtocolError::PeerAbort(
                String::from_utf8_lossy(&payload).into_owned(),
            ));
        }
        if got != kind as u8 || got_level != level {
            return Err(ProtocolError::Desync {
                sent: kind,
                sent_level: level,
                got,
                got_level,
            });
        }
        Ok(payload)
    }
}

impl RoundTransport for TcpExchange {
    fn exchange(
        &mut self,
        kind: MsgKind,
        level: u16,
        payload: &[u8],
    ) -> Result<Vec<u8>, ProtocolError> {
        if self.role == 0 {
            self.send(kind, level, payload)?;
            self.recv(kind, level)
        } else {
            let got = self.recv(kind, level)?;
            self.send(kind, level, payload)?;
            Ok(got)
        }
    }
}
