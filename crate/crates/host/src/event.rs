// SPDX-License-Identifier: Apache-2.0

//! Decoded trace events and their JSON-lines form.
//!
//! One event per line:
//!
//! ```json
//! {"module":3,"type":"ITRACE","timestamp":16,"payload":{"start_pc":64,"run_length":2}}
//! ```

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::frame::packet_type;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItraceRecord {
    pub start_pc: u32,
    pub run_length: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerAction {
    StartCollection,
    StopCollection,
}

impl TriggerAction {
    pub fn code(self) -> u32 {
        match self {
            TriggerAction::StartCollection => 1,
            TriggerAction::StopCollection => 2,
        }
    }

    fn from_code(c: u16) -> Option<Self> {
        match c {
            1 => Some(TriggerAction::StartCollection),
            2 => Some(TriggerAction::StopCollection),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerScope {
    Local,
    Global,
}

impl TriggerScope {
    pub fn code(self) -> u32 {
        match self {
            TriggerScope::Local => 0,
            TriggerScope::Global => 1,
        }
    }

    fn from_code(c: u16) -> Option<Self> {
        match c {
            0 => Some(TriggerScope::Local),
            1 => Some(TriggerScope::Global),
            _ => None,
        }
    }
}

/// Event kind and payload; serialized as `"type"` plus `"payload"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "UPPERCASE")]
pub enum EventData {
    Itrace(ItraceRecord),
    #[serde(rename = "NOCSTAT")]
    NocStat {
        x: u8,
        y: u8,
        window: u32,
        north: u16,
        east: u16,
        south: u16,
        west: u16,
        local: u16,
    },
    Trigger {
        action: TriggerAction,
        scope: TriggerScope,
        origin: u8,
        cause: u16,
    },
    Fault {
        kind: u16,
        pc: u32,
        addr: u32,
    },
    Na {
        kind: u16,
        a: u16,
        b: u16,
    },
}

impl EventData {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventData::Itrace(_) => "ITRACE",
            EventData::NocStat { .. } => "NOCSTAT",
            EventData::Trigger { .. } => "TRIGGER",
            EventData::Fault { .. } => "FAULT",
            EventData::Na { .. } => "NA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub module: u8,
    pub timestamp: u32,
    #[serde(flatten)]
    pub data: EventData,
}

fn word(hi: u16, lo: u16) -> u32 {
    (hi as u32) << 16 | lo as u32
}

impl TraceEvent {
    /// Decode a trace packet's type and body. `None` if the type is not a
    /// trace type or the body has the wrong shape.
    pub fn decode(module: u8, ptype: u8, timestamp: u32, body: &[u16]) -> Option<Self> {
        let b = body;
        let data = match (ptype, b.len()) {
            (packet_type::ITRACE, 3) if b[2] > 0 => EventData::Itrace(ItraceRecord {
                start_pc: word(b[0], b[1]),
                run_length: b[2],
            }),
            (packet_type::NOCSTAT, 8) => EventData::NocStat {
                x: (b[0] >> 8) as u8,
                y: b[0] as u8,
                window: word(b[1], b[2]),
                north: b[3],
                east: b[4],
                south: b[5],
                west: b[6],
                local: b[7],
            },
            (packet_type::TRIGGER, 4) => EventData::Trigger {
                action: TriggerAction::from_code(b[0])?,
                scope: TriggerScope::from_code(b[1])?,
                origin: b[2] as u8,
                cause: b[3],
            },
            (packet_type::FAULT, 5) => EventData::Fault {
                kind: b[0],
                pc: word(b[1], b[2]),
                addr: word(b[3], b[4]),
            },
            (packet_type::NA, 3) => EventData::Na {
                kind: b[0],
                a: b[1],
                b: b[2],
            },
            _ => return None,
        };
        Some(TraceEvent {
            module,
            timestamp,
            data,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Expand instruction-trace records into the retired pc sequence.
pub fn decompress_itrace(records: &[ItraceRecord]) -> Vec<u32> {
    let mut out = Vec::with_capacity(records.iter().map(|r| r.run_length as usize).sum());
    for r in records {
        let mut pc = r.start_pc;
        for _ in 0..r.run_length {
            out.push(pc);
            pc = pc.wrapping_add(4);
        }
    }
    out
}

/// Pc sequence of one module's ITRACE events, in stream order.
pub fn module_pcs<'a>(events: impl IntoIterator<Item = &'a TraceEvent>, module: u8) -> Vec<u32> {
    let recs: Vec<ItraceRecord> = events
        .into_iter()
        .filter(|e| e.module == module)
        .filter_map(|e| match e.data {
            EventData::Itrace(r) => Some(r),
            _ => None,
        })
        .collect();
    decompress_itrace(&recs)
}

pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = &'a TraceEvent>,
) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}", e.to_json())?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
