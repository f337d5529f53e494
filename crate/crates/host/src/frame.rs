// SPDX-License-Identifier: Apache-2.0

//! Host-side decoding of the off-chip byte stream.
//!
//! A frame is a little-endian `u16` flit count followed by that many
//! little-endian 16-bit flits. Flit 0 is `dest << 8 | src`, flit 1 the
//! packet type, flits 2 and 3 the timestamp (high half first); the body
//! follows. Packets are 4 to 16 flits long.

use std::collections::VecDeque;

pub const MIN_FLITS: usize = 4;
pub const MAX_FLITS: usize = 16;

pub mod packet_type {
    pub const ITRACE: u8 = 1;
    pub const NOCSTAT: u8 = 2;
    pub const TRIGGER: u8 = 3;
    pub const FAULT: u8 = 4;
    pub const NA: u8 = 5;
    pub const DISCOVER: u8 = 0x10;
    pub const REG_WRITE: u8 = 0x11;
    pub const REG_READ: u8 = 0x12;
    pub const REG_VALUE: u8 = 0x13;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub dest: u8,
    pub src: u8,
    pub ptype: u8,
    pub timestamp: u32,
    pub body: Vec<u16>,
}

impl RawPacket {
    pub fn request(dest: u8, ptype: u8, body: Vec<u16>) -> Self {
        RawPacket {
            dest,
            src: 0,
            ptype,
            timestamp: 0,
            body,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut flits = vec![
            (self.dest as u16) << 8 | self.src as u16,
            self.ptype as u16,
            (self.timestamp >> 16) as u16,
            self.timestamp as u16,
        ];
        flits.extend_from_slice(&self.body);
        assert!(flits.len() <= MAX_FLITS, "request too long");
        let mut out = Vec::with_capacity(2 + 2 * flits.len());
        out.extend_from_slice(&(flits.len() as u16).to_le_bytes());
        for f in flits {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    fn from_flits(f: &[u16]) -> Self {
        RawPacket {
            dest: (f[0] >> 8) as u8,
            src: f[0] as u8,
            ptype: f[1] as u8,
            timestamp: (f[2] as u32) << 16 | f[3] as u32,
            body: f[4..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformed {
    /// Byte offset of the frame start within the stream.
    pub offset: u64,
    pub reason: String,
}

/// Incremental decoder. An invalid flit count loses frame alignment, so
/// after reporting it the decoder rejects everything that follows.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: VecDeque<u8>,
    offset: u64,
    broken: bool,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if !self.broken {
            self.buf.extend(bytes);
        }
    }

    pub fn is_broken(&self) -> bool {
        self.broken
    }

    /// Bytes buffered but not yet forming a full frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn next_packet(&mut self) -> Option<Result<RawPacket, Malformed>> {
        if self.broken || self.buf.len() < 2 {
            return None;
        }
        let count = u16::from_le_bytes([self.buf[0], self.buf[1]]) as usize;
        let offset = self.offset;
        if !(MIN_FLITS..=MAX_FLITS).contains(&count) {
            self.broken = true;
            self.buf.clear();
            return Some(Err(Malformed {
                offset,
                reason: format!("flit count {count} outside {MIN_FLITS}..={MAX_FLITS}"),
            }));
        }
        let len = 2 + 2 * count;
        if self.buf.len() < len {
            return None;
        }
        let bytes: Vec<u8> = self.buf.drain(..len).collect();
        self.offset += len as u64;
        let flits: Vec<u16> = bytes[2..]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        Some(Ok(RawPacket::from_flits(&flits)))
    }

    /// Called at end of stream: a partial frame is an error.
    pub fn finish(&mut self) -> Option<Malformed> {
        if self.broken || self.buf.is_empty() {
            return None;
        }
        let m = Malformed {
            offset: self.offset,
            reason: format!(
                "stream ended inside a frame ({} bytes buffered)",
                self.buf.len()
            ),
        };
        self.buf.clear();
        Some(m)
    }
}
