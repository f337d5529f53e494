// SPDX-License-Identifier: Apache-2.0

//! Host side of the debug system: connect to a simulated chip over TCP or
//! an in-process pipe, discover its debug modules, program triggers,
//! control collection, and decode, decompress and merge the trace stream.
//!
//! ```no_run
//! use tilesoc_host::{ModuleSet, Session, SessionOptions, TransportSpec};
//!
//! let mut s = Session::connect(TransportSpec::Tcp("127.0.0.1:7000".into()), SessionOptions::default())?;
//! let modules = s.enumerate()?;
//! s.start_collection(&ModuleSet::All)?;
//! s.run()?;
//! while let Ok(ev) = s.next_event() {
//!     println!("{}", ev.to_json());
//! }
//! # Ok::<(), tilesoc_host::SessionError>(())
//! ```

pub mod event;
pub mod frame;
pub mod loopback;
pub mod merge;
pub mod session;
pub mod transport;
pub mod trigger;

pub use event::{decompress_itrace, read_jsonl, write_jsonl, EventData, ItraceRecord, TraceEvent};
pub use merge::{merge_streams, MergeError, StreamMerger};
pub use session::{Control, EventStream, ModuleSet, Session, SessionError, SessionOptions};
pub use transport::TransportSpec;
pub use trigger::{parse_trigger_file, Condition, InvalidTrigger, TriggerSpec};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModuleKind {
    Extif,
    CoreTrace,
    NocStat,
}

impl ModuleKind {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ModuleKind::Extif),
            2 => Some(ModuleKind::CoreTrace),
            3 => Some(ModuleKind::NocStat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Attachment {
    /// The external interface; `modules` counts every module on the ring.
    Host {
        modules: u16,
    },
    Tile {
        tile: u16,
    },
    Router {
        x: u8,
        y: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugModuleDescriptor {
    pub id: u8,
    #[serde(rename = "type")]
    pub module_type: ModuleKind,
    pub version: u8,
    pub attach: Attachment,
}

impl DebugModuleDescriptor {
    /// Decode a descriptor register value `type << 24 | version << 16 | attach`.
    pub fn from_word(id: u8, word: u32) -> Option<Self> {
        let module_type = ModuleKind::from_code((word >> 24) as u8)?;
        let a = word as u16;
        let attach = match module_type {
            ModuleKind::Extif => Attachment::Host { modules: a },
            ModuleKind::CoreTrace => Attachment::Tile { tile: a },
            ModuleKind::NocStat => Attachment::Router {
                x: (a >> 8) as u8,
                y: a as u8,
            },
        };
        Some(DebugModuleDescriptor {
            id,
            module_type,
            version: (word >> 16) as u8,
            attach,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_words() {
        let d = DebugModuleDescriptor::from_word(6, 3 << 24 | 1 << 16 | 0x0100).unwrap();
        assert_eq!(d.module_type, ModuleKind::NocStat);
        assert_eq!(d.attach, Attachment::Router { x: 1, y: 0 });
        assert!(DebugModuleDescriptor::from_word(1, 9 << 24).is_none());
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"id":6,"type":"NOC_STAT","version":1,"attach":{"kind":"router","x":1,"y":0}}"#
        );
    }
}
