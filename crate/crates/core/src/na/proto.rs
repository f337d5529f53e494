// SPDX-License-Identifier: Apache-2.0

//! First body word of adapter packets.
//!
//! MSG: `src_port << 16 | dst_port << 8 | len`, followed by `len` words.
//!
//! REQ/RESP: `op << 28 | tag << 24 | segment << 16 | len`. Requests carry
//! the target word address next; DMA/LSU writes then carry the data. Read
//! responses carry the data; write responses are the header alone.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsgHeader {
    pub src_port: u8,
    pub dst_port: u8,
    pub len: u8,
}

impl MsgHeader {
    pub fn encode(self) -> u32 {
        (self.src_port as u32) << 16 | (self.dst_port as u32) << 8 | self.len as u32
    }

    pub fn decode(word: u32) -> Self {
        MsgHeader {
            src_port: (word >> 16) as u8,
            dst_port: (word >> 8) as u8,
            len: word as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    DmaRead = 1,
    DmaWrite = 2,
    LsuRead = 3,
    LsuWrite = 4,
}

impl Op {
    fn from_bits(bits: u32) -> Option<Op> {
        Some(match bits {
            1 => Op::DmaRead,
            2 => Op::DmaWrite,
            3 => Op::LsuRead,
            4 => Op::LsuWrite,
            _ => return None,
        })
    }
}

/// Set in the op field of a response whose request could not be served.
const ERROR_BIT: u32 = 0x8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XferHeader {
    pub op: Op,
    pub error: bool,
    pub tag: u8,
    pub segment: u8,
    pub len: u16,
}

impl XferHeader {
    pub fn new(op: Op, tag: u8, segment: u8, len: u16) -> Self {
        XferHeader {
            op,
            error: false,
            tag,
            segment,
            len,
        }
    }

    pub fn encode(self) -> u32 {
        let op = self.op as u32 | if self.error { ERROR_BIT } else { 0 };
        op << 28 | ((self.tag & 0xf) as u32) << 24 | (self.segment as u32) << 16 | self.len as u32
    }

    pub fn decode(word: u32) -> Option<Self> {
        let op_bits = word >> 28;
        Some(XferHeader {
            op: Op::from_bits(op_bits & !ERROR_BIT)?,
            error: op_bits & ERROR_BIT != 0,
            tag: ((word >> 24) & 0xf) as u8,
            segment: (word >> 16) as u8,
            len: word as u16,
        })
    }
}
