// SPDX-License-Identifier: Apache-2.0

//! Off-chip framing: a little-endian 16-bit flit count followed by the
//! flits, each little-endian.

use thiserror::Error;

use super::{HEADER_FLITS, MAX_PACKET_FLITS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame too short: have {have} bytes, need {need}")]
    FrameTooShort { have: usize, need: usize },
    #[error("flit count {count} does not match the frame")]
    FlitCountMismatch { count: usize },
}

pub fn frame(flits: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + 2 * flits.len());
    out.extend_from_slice(&(flits.len() as u16).to_le_bytes());
    for f in flits {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

fn valid_count(count: usize) -> bool {
    (HEADER_FLITS..=MAX_PACKET_FLITS).contains(&count)
}

/// Parse exactly one frame.
pub fn parse_frame(bytes: &[u8]) -> Result<Vec<u16>, FrameError> {
    if bytes.len() < 2 {
        return Err(FrameError::FrameTooShort {
            have: bytes.len(),
            need: 2,
        });
    }
    let count = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    if !valid_count(count) {
        return Err(FrameError::FlitCountMismatch { count });
    }
    let need = 2 + 2 * count;
    if bytes.len() < need {
        return Err(FrameError::FrameTooShort {
            have: bytes.len(),
            need,
        });
    }
    if bytes.len() > need {
        return Err(FrameError::FlitCountMismatch { count });
    }
    Ok(bytes[2..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

/// Splits a byte stream into frames.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete frame, `None` if more bytes are needed. A bad count
    /// is an error after which the stream cannot be resynchronized.
    pub fn next_frame(&mut self) -> Option<Result<Vec<u16>, FrameError>> {
        if self.buf.len() < 2 {
            return None;
        }
        let count = u16::from_le_bytes([self.buf[0], self.buf[1]]) as usize;
        if !valid_count(count) {
            return Some(Err(FrameError::FlitCountMismatch { count }));
        }
        let need = 2 + 2 * count;
        if self.buf.len() < need {
            return None;
        }
        let rest = self.buf.split_off(need);
        let bytes = std::mem::replace(&mut self.buf, rest);
        Some(parse_frame(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seven_flits_make_sixteen_bytes() {
        let flits = [3, 1, 0, 0x10, 0, 0x40, 2];
        let bytes = frame(&flits);
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], &[7, 0, 3, 0]);
        assert_eq!(parse_frame(&bytes).unwrap(), flits);
    }

    #[test]
    fn truncated_and_padded_frames() {
        let bytes = frame(&[1, 2, 3, 4, 5]);
        assert!(matches!(
            parse_frame(&bytes[..7]),
            Err(FrameError::FrameTooShort { .. })
        ));
        assert!(matches!(
            parse_frame(&bytes[..1]),
            Err(FrameError::FrameTooShort { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(
            parse_frame(&long),
            Err(FrameError::FlitCountMismatch { count: 5 })
        );
        assert_eq!(
            parse_frame(&frame(&[1, 2])),
            Err(FrameError::FlitCountMismatch { count: 2 })
        );
    }

    proptest! {
        #[test]
        fn round_trip(flits in prop::collection::vec(any::<u16>(), 4..=16)) {
            prop_assert_eq!(parse_frame(&frame(&flits)).unwrap(), flits);
        }

        #[test]
        fn decoder_handles_any_split(
            packets in prop::collection::vec(prop::collection::vec(any::<u16>(), 4..=16), 1..8),
            cut in 0usize..200,
        ) {
            let bytes: Vec<u8> = packets.iter().flat_map(|p| frame(p)).collect();
            let cut = cut.min(bytes.len());
            let mut d = FrameDecoder::new();
            let mut out = Vec::new();
            d.push(&bytes[..cut]);
            while let Some(f) = d.next_frame() { out.push(f.unwrap()); }
            d.push(&bytes[cut..]);
            while let Some(f) = d.next_frame() { out.push(f.unwrap()); }
            prop_assert_eq!(out, packets);
            prop_assert_eq!(d.buffered(), 0);
        }
    }
}
