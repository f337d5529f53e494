// SPDX-License-Identifier: Apache-2.0

//! The per-tile network adapter: message endpoints, DMA and the PGAS
//! load-store unit.
//!
//! # Register map
//!
//! Offsets are relative to [`MMIO_BASE`](crate::pe::MMIO_BASE). All
//! registers are 32 bits wide; accesses to offsets not listed here fault.
//!
//! | offset       | name             | access | meaning                                   |
//! |--------------|------------------|--------|-------------------------------------------|
//! | `0x00`       | SEND_DEST_TILE   | rw     | destination tile                          |
//! | `0x04`       | SEND_DEST_PORT   | rw     | destination port (0..15)                  |
//! | `0x08`       | SEND_SRC_PORT    | rw     | source port (0..15)                       |
//! | `0x0C`       | SEND_LEN         | rw     | payload length in words (0..32)           |
//! | `0x10`       | SEND_ADDR        | rw     | payload address in local memory           |
//! | `0x14`       | SEND_GO / STATUS | rw     | write: send; read: status bits below      |
//! | `0x20 + 4p`  | RECV_STATUS(p)   | r      | messages queued on port `p`               |
//! | `0x60 + 4p`  | RECV_WORD(p)     | r      | next word of the head message; stalls     |
//! | `0xA0`       | DMA_LOCAL_ADDR   | rw     | local word address                        |
//! | `0xA4`       | DMA_REMOTE_TILE  | rw     | remote tile                               |
//! | `0xA8`       | DMA_REMOTE_ADDR  | rw     | word address in the remote tile           |
//! | `0xAC`       | DMA_LEN          | rw     | length in words (0..1024)                 |
//! | `0xB0`       | DMA_START        | rw     | write 0 = read remote, 1 = write remote;  |
//! |              |                  |        | read: id of the last started transaction  |
//! |              |                  |        | or `0xFFFF_FFFF` if it was rejected       |
//! | `0xB4`       | DMA_DONE         | r/w1c  | bit `i` set when transaction `i` finished |
//! | `0xB8`       | DMA_ERROR        | r/w1c  | bit0 no free slot, bit1 range, bit2 remote|
//! | `0xF0`       | TILE_ID          | r      | own tile id                               |
//! | `0xF4`       | NA_ERROR         | r/w1c  | bit0 receive overflow, bit1 unknown port  |
//! | `0xF8`       | TILE_COUNT       | r      | number of tiles in the system             |
//!
//! SEND status bits: bit0 busy (previous message not yet injected), bit1
//! length out of range, bit2 GO while busy, bit3 bad destination tile or
//! port, bit4 payload address out of range. Error bits describe the most
//! recent GO.
//!
//! The first RECV_WORD read of a message returns a header word
//! `src_tile << 24 | src_port << 16 | dst_port << 8 | len`; the following
//! `len` reads return the payload, after which the message is dequeued.

mod adapter;
pub mod proto;

pub use adapter::{
    DmaDir, DmaError, NaEvent, NaEventKind, NaStats, NetworkAdapter, SendError, TileBus, TileOrg,
};

use serde::{Deserialize, Serialize};

pub const PORTS: usize = 16;
pub const RECV_QUEUE_DEPTH: usize = 16;
pub const MAX_MSG_WORDS: usize = 32;
pub const DMA_SLOTS: usize = 8;
pub const DMA_MAX_WORDS: u32 = 1024;
pub const DMA_SEGMENT_WORDS: u32 = 32;
pub const MIN_PARTITION_BYTES: u32 = 4096;

pub mod regs {
    pub const SEND_DEST_TILE: u32 = 0x00;
    pub const SEND_DEST_PORT: u32 = 0x04;
    pub const SEND_SRC_PORT: u32 = 0x08;
    pub const SEND_LEN: u32 = 0x0C;
    pub const SEND_ADDR: u32 = 0x10;
    pub const SEND_GO: u32 = 0x14;
    pub const RECV_STATUS: u32 = 0x20;
    pub const RECV_WORD: u32 = 0x60;
    pub const DMA_LOCAL_ADDR: u32 = 0xA0;
    pub const DMA_REMOTE_TILE: u32 = 0xA4;
    pub const DMA_REMOTE_ADDR: u32 = 0xA8;
    pub const DMA_LEN: u32 = 0xAC;
    pub const DMA_START: u32 = 0xB0;
    pub const DMA_DONE: u32 = 0xB4;
    pub const DMA_ERROR: u32 = 0xB8;
    pub const TILE_ID: u32 = 0xF0;
    pub const NA_ERROR: u32 = 0xF4;
    pub const TILE_COUNT: u32 = 0xF8;

    pub const STATUS_BUSY: u32 = 1 << 0;
    pub const STATUS_LEN: u32 = 1 << 1;
    pub const STATUS_SEND_BUSY: u32 = 1 << 2;
    pub const STATUS_BAD_DEST: u32 = 1 << 3;
    pub const STATUS_BAD_ADDR: u32 = 1 << 4;

    pub const DMA_ERR_NO_SLOT: u32 = 1 << 0;
    pub const DMA_ERR_RANGE: u32 = 1 << 1;
    pub const DMA_ERR_REMOTE: u32 = 1 << 2;

    pub const NA_ERR_OVERFLOW: u32 = 1 << 0;
    pub const NA_ERR_UNKNOWN_PORT: u32 = 1 << 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub tile: usize,
    pub port: u8,
}

/// Result of translating a global address in a partitioned address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Translation {
    Local(u32),
    Remote { tile: usize, offset: u32 },
    Fault,
}

/// Split a global address into (tile, offset) for partitions of
/// `partition_size` bytes, one per tile.
pub fn lsu_translate(
    addr: u32,
    own_tile: usize,
    partition_size: u32,
    num_tiles: usize,
) -> Translation {
    debug_assert!(partition_size.is_power_of_two());
    let tile = (addr / partition_size) as usize;
    let offset = addr % partition_size;
    if tile == own_tile && tile < num_tiles {
        Translation::Local(offset)
    } else if tile < num_tiles {
        Translation::Remote { tile, offset }
    } else {
        Translation::Fault
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translate_examples() {
        let p = 64 * 1024;
        assert_eq!(
            lsu_translate(0x0002_0010, 2, p, 4),
            Translation::Local(0x10)
        );
        assert_eq!(
            lsu_translate(0x0002_0010, 0, p, 4),
            Translation::Remote {
                tile: 2,
                offset: 0x10
            }
        );
        assert_eq!(lsu_translate(0x0004_0000, 0, p, 4), Translation::Fault);
        assert_eq!(lsu_translate(u32::MAX, 0, p, 4), Translation::Fault);
    }
}
