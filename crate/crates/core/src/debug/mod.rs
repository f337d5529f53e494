// SPDX-License-Identifier: Apache-2.0

//! Trace-based debug fabric.
//!
//! Debug modules observe the functional system and emit timestamped trace
//! events. Events travel as 16-bit packets over the debug ring to the
//! external interface (module 0), which frames them for the host.
//!
//! Module ids: 0 is the external interface, then one instruction-trace
//! module per tile in tile order, then one link-statistics module per
//! router in router order. The ring node index equals the module id.
//!
//! Packet layout, one 16-bit word per flit:
//!
//! ```text
//! flit 0    dest << 8 | src
//! flit 1    packet type (low byte)
//! flit 2    timestamp[31:16]
//! flit 3    timestamp[15:0]
//! flit 4..  body, at most 12 words
//! ```
//!
//! Event bodies:
//!
//! | type | kind      | body                                          |
//! |------|-----------|-----------------------------------------------|
//! | 1    | ITRACE    | pc_hi, pc_lo, run_length                      |
//! | 2    | NOCSTAT   | x << 8 \| y, win_hi, win_lo, N, E, S, W, L    |
//! | 3    | TRIGGER   | action, scope, origin, cause                  |
//! | 4    | FAULT     | kind, pc_hi, pc_lo, addr_hi, addr_lo          |
//! | 5    | NA        | kind, a, b                                    |
//!
//! Control packets: DISCOVER (0x10, empty body), REG_WRITE (0x11:
//! reg, hi, lo), REG_READ (0x12: reg), REG_VALUE (0x13: reg, hi, lo).

pub mod compress;
mod fabric;
pub mod link;
mod module;
pub mod nocstat;
pub mod trigger;
pub mod wire;

pub use compress::{decompress, ItraceCompressor, ItraceRecord};
pub use fabric::{CrossTrigger, DebugFabric, DebugLayout, RING_DEPTH};
pub use link::{pipe, ChipLink, PipeEnd};
pub use nocstat::{NocStatCounter, NocStatRecord};
pub use trigger::{eval_trigger, Action, Condition, Observation, Scope, TriggerSpec};
pub use wire::{frame, parse_frame, FrameDecoder, FrameError};

use thiserror::Error;

use crate::noc::ring::BROADCAST;

pub const EXTIF_ID: u8 = 0;
pub const BROADCAST_ID: u8 = BROADCAST;
pub const HEADER_FLITS: usize = 4;
pub const MAX_BODY_FLITS: usize = 12;
pub const MAX_PACKET_FLITS: usize = HEADER_FLITS + MAX_BODY_FLITS;
pub const MODULE_VERSION: u8 = 1;
pub const DEFAULT_NOCSTAT_WINDOW: u32 = 256;

pub mod ptype {
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

/// Module register numbers.
pub mod reg {
    /// `type << 24 | version << 16 | attach`, read only.
    pub const DESCRIPTOR: u16 = 0x00;
    /// Collection enable.
    pub const ENABLE: u16 = 0x01;
    /// Whether broadcast cross-triggers are applied (default 1).
    pub const TRIG_IN_ENABLE: u16 = 0x02;
    /// Lifetime observation count: retirements or flit departures.
    pub const EVENT_COUNT: u16 = 0x03;
    /// Trace events emitted so far.
    pub const EMITTED: u16 = 0x04;
    /// 0 none, 1 pc equals, 2 event count reaches, 3 link load above.
    pub const TRIG_COND: u16 = 0x10;
    /// pc, count, or load fraction as IEEE-754 single bits.
    pub const TRIG_ARG: u16 = 0x11;
    pub const TRIG_WINDOW: u16 = 0x12;
    /// 1 start collection, 2 stop collection.
    pub const TRIG_ACTION: u16 = 0x13;
    /// 0 local, 1 global.
    pub const TRIG_SCOPE: u16 = 0x14;
    /// Write 1 to arm, 0 to disarm. Reads 1 while armed and not fired.
    pub const TRIG_ARM: u16 = 0x15;
    pub const TRIG_FIRED: u16 = 0x16;
    pub const NOCSTAT_WINDOW: u16 = 0x20;
    /// External interface only: write 1 to let the functional system run.
    pub const RUN: u16 = 0x30;
    pub const CYCLE_LO: u16 = 0x31;
    pub const CYCLE_HI: u16 = 0x32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleType {
    Extif = 1,
    CoreTrace = 2,
    NocStat = 3,
}

impl ModuleType {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => ModuleType::Extif,
            2 => ModuleType::CoreTrace,
            3 => ModuleType::NocStat,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ModuleType::Extif => "EXTIF",
            ModuleType::CoreTrace => "CORE_TRACE",
            ModuleType::NocStat => "NOC_STAT",
        }
    }
}

/// Identity of one ring node. `attach` is the module count for the
/// external interface, the tile id for trace modules and `x << 8 | y`
/// for router statistics modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub id: u8,
    pub module_type: ModuleType,
    pub version: u8,
    pub attach: u16,
}

impl Descriptor {
    pub fn word(&self) -> u32 {
        (self.module_type as u32) << 24 | (self.version as u32) << 16 | self.attach as u32
    }

    pub fn from_word(id: u8, word: u32) -> Option<Self> {
        Some(Descriptor {
            id,
            module_type: ModuleType::from_code((word >> 24) as u8)?,
            version: (word >> 16) as u8,
            attach: word as u16,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DebugError {
    #[error("packet body of {0} words exceeds {MAX_BODY_FLITS}")]
    PayloadTooLong(usize),
    #[error("packet of {0} flits is shorter than the header")]
    Truncated(usize),
}

/// One debug ring packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebugPacket {
    pub dest: u8,
    pub src: u8,
    pub ptype: u8,
    pub timestamp: u32,
    pub body: Vec<u16>,
}

impl DebugPacket {
    pub fn to_flits(&self) -> Result<Vec<u16>, DebugError> {
        if self.body.len() > MAX_BODY_FLITS {
            return Err(DebugError::PayloadTooLong(self.body.len()));
        }
        let mut f = Vec::with_capacity(HEADER_FLITS + self.body.len());
        f.push((self.dest as u16) << 8 | self.src as u16);
        f.push(self.ptype as u16);
        f.push((self.timestamp >> 16) as u16);
        f.push(self.timestamp as u16);
        f.extend_from_slice(&self.body);
        Ok(f)
    }

    pub fn from_flits(flits: &[u16]) -> Result<Self, DebugError> {
        if flits.len() < HEADER_FLITS {
            return Err(DebugError::Truncated(flits.len()));
        }
        if flits.len() > MAX_PACKET_FLITS {
            return Err(DebugError::PayloadTooLong(flits.len() - HEADER_FLITS));
        }
        Ok(DebugPacket {
            dest: (flits[0] >> 8) as u8,
            src: flits[0] as u8,
            ptype: flits[1] as u8,
            timestamp: (flits[2] as u32) << 16 | flits[3] as u32,
            body: flits[HEADER_FLITS..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerNote {
    pub action: Action,
    pub scope: Scope,
    /// Module whose trigger fired.
    pub origin: u8,
    /// Condition code of the firing trigger.
    pub cause: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventBody {
    Itrace(ItraceRecord),
    NocStat(NocStatRecord),
    Trigger(TriggerNote),
    Fault { kind: u16, pc: u32, addr: u32 },
    Na { kind: u16, a: u16, b: u16 },
}

/// A trace event as emitted by a debug module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub module: u8,
    pub timestamp: u32,
    pub body: EventBody,
}

fn split(v: u32) -> [u16; 2] {
    [(v >> 16) as u16, v as u16]
}

fn join(hi: u16, lo: u16) -> u32 {
    (hi as u32) << 16 | lo as u32
}

impl TraceEvent {
    pub fn ptype(&self) -> u8 {
        match self.body {
            EventBody::Itrace(_) => ptype::ITRACE,
            EventBody::NocStat(_) => ptype::NOCSTAT,
            EventBody::Trigger(_) => ptype::TRIGGER,
            EventBody::Fault { .. } => ptype::FAULT,
            EventBody::Na { .. } => ptype::NA,
        }
    }

    pub fn payload(&self) -> Vec<u16> {
        match self.body {
            EventBody::Itrace(r) => {
                let [h, l] = split(r.start_pc);
                vec![h, l, r.run_length]
            }
            EventBody::NocStat(r) => {
                let [h, l] = split(r.window);
                let mut v = vec![(r.x as u16) << 8 | r.y as u16, h, l];
                v.extend_from_slice(&r.counts);
                v
            }
            EventBody::Trigger(t) => {
                vec![t.action as u16, t.scope as u16, t.origin as u16, t.cause]
            }
            EventBody::Fault { kind, pc, addr } => {
                let [ph, pl] = split(pc);
                let [ah, al] = split(addr);
                vec![kind, ph, pl, ah, al]
            }
            EventBody::Na { kind, a, b } => vec![kind, a, b],
        }
    }

    /// Trace events always travel to the external interface.
    pub fn to_packet(&self) -> DebugPacket {
        DebugPacket {
            dest: EXTIF_ID,
            src: self.module,
            ptype: self.ptype(),
            timestamp: self.timestamp,
            body: self.payload(),
        }
    }

    pub fn from_packet(p: &DebugPacket) -> Option<TraceEvent> {
        let b = &p.body;
        let body = match (p.ptype, b.len()) {
            (ptype::ITRACE, 3) => EventBody::Itrace(ItraceRecord {
                start_pc: join(b[0], b[1]),
                run_length: b[2],
            }),
            (ptype::NOCSTAT, 8) => EventBody::NocStat(NocStatRecord {
                x: (b[0] >> 8) as u8,
                y: b[0] as u8,
                window: join(b[1], b[2]),
                counts: [b[3], b[4], b[5], b[6], b[7]],
            }),
            (ptype::TRIGGER, 4) => EventBody::Trigger(TriggerNote {
                action: Action::from_code(b[0] as u32)?,
                scope: Scope::from_code(b[1] as u32)?,
                origin: b[2] as u8,
                cause: b[3],
            }),
            (ptype::FAULT, 5) => EventBody::Fault {
                kind: b[0],
                pc: join(b[1], b[2]),
                addr: join(b[3], b[4]),
            },
            (ptype::NA, 3) => EventBody::Na {
                kind: b[0],
                a: b[1],
                b: b[2],
            },
            _ => return None,
        };
        Some(TraceEvent {
            module: p.src,
            timestamp: p.timestamp,
            body,
        })
    }
}
