// SPDX-License-Identifier: Apache-2.0

//! Trigger definitions as accepted by `attach --triggers` and the HTTP
//! API, and their register encoding.
//!
//! ```json
//! {
//!   "module": 1,
//!   "condition": { "type": "pc_equals", "pc": "0x40" },
//!   "action": "start_collection",
//!   "scope": "local"
//! }
//! ```
//!
//! Conditions: `pc_equals` (`pc`), `event_count_reaches` (`count`),
//! `link_load_above` (`fraction` in [0, 1], `window` cycles). Numbers may
//! be given as JSON integers or as `"0x"`-prefixed strings. A trigger file
//! is a JSON array of trigger objects.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::event::{TriggerAction, TriggerScope};
use crate::ModuleKind;

pub mod reg {
    pub const DESCRIPTOR: u16 = 0x00;
    pub const ENABLE: u16 = 0x01;
    pub const TRIG_IN_ENABLE: u16 = 0x02;
    pub const EVENT_COUNT: u16 = 0x03;
    pub const EMITTED: u16 = 0x04;
    pub const TRIG_COND: u16 = 0x10;
    pub const TRIG_ARG: u16 = 0x11;
    pub const TRIG_WINDOW: u16 = 0x12;
    pub const TRIG_ACTION: u16 = 0x13;
    pub const TRIG_SCOPE: u16 = 0x14;
    pub const TRIG_ARM: u16 = 0x15;
    pub const TRIG_FIRED: u16 = 0x16;
    pub const NOCSTAT_WINDOW: u16 = 0x20;
    pub const RUN: u16 = 0x30;
    pub const CYCLE_LO: u16 = 0x31;
    pub const CYCLE_HI: u16 = 0x32;
}

fn number<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        Int(u32),
        Text(String),
    }
    match Num::deserialize(d)? {
        Num::Int(v) => Ok(v),
        Num::Text(s) => {
            let t = s.trim();
            let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                Some(hex) => u32::from_str_radix(hex, 16),
                None => t.parse(),
            };
            parsed.map_err(|_| serde::de::Error::custom(format!("not a 32-bit number: {s:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    PcEquals {
        #[serde(deserialize_with = "number")]
        pc: u32,
    },
    EventCountReaches {
        #[serde(deserialize_with = "number")]
        count: u32,
    },
    LinkLoadAbove {
        fraction: f32,
        #[serde(deserialize_with = "number")]
        window: u32,
    },
}

impl Condition {
    pub fn code(&self) -> u32 {
        match self {
            Condition::PcEquals { .. } => 1,
            Condition::EventCountReaches { .. } => 2,
            Condition::LinkLoadAbove { .. } => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Condition::PcEquals { .. } => "pc_equals",
            Condition::EventCountReaches { .. } => "event_count_reaches",
            Condition::LinkLoadAbove { .. } => "link_load_above",
        }
    }

    pub fn compatible_with(&self, kind: ModuleKind) -> bool {
        matches!(
            (self, kind),
            (Condition::PcEquals { .. }, ModuleKind::CoreTrace)
                | (
                    Condition::EventCountReaches { .. },
                    ModuleKind::CoreTrace | ModuleKind::NocStat
                )
                | (Condition::LinkLoadAbove { .. }, ModuleKind::NocStat)
        )
    }

    fn arg_and_window(&self) -> (u32, u32) {
        match *self {
            Condition::PcEquals { pc } => (pc, 0),
            Condition::EventCountReaches { count } => (count, 0),
            Condition::LinkLoadAbove { fraction, window } => (fraction.to_bits(), window),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub module: u8,
    pub condition: Condition,
    pub action: TriggerAction,
    #[serde(default = "local")]
    pub scope: TriggerScope,
}

fn local() -> TriggerScope {
    TriggerScope::Local
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid trigger: {0}")]
pub struct InvalidTrigger(pub String);

impl TriggerSpec {
    pub fn from_json(text: &str) -> Result<Self, InvalidTrigger> {
        let t: TriggerSpec =
            serde_json::from_str(text).map_err(|e| InvalidTrigger(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    /// Value checks that do not need the target module.
    pub fn check(&self) -> Result<(), InvalidTrigger> {
        if let Condition::LinkLoadAbove { fraction, window } = self.condition {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(InvalidTrigger(format!(
                    "fraction {fraction} outside [0, 1]"
                )));
            }
            if !(1..=u16::MAX as u32).contains(&window) {
                return Err(InvalidTrigger(format!("window {window} outside 1..=65535")));
            }
        }
        Ok(())
    }

    /// Register writes that program the trigger, arming last.
    pub fn register_writes(&self) -> Vec<(u16, u32)> {
        let (arg, window) = self.condition.arg_and_window();
        vec![
            (reg::TRIG_COND, self.condition.code()),
            (reg::TRIG_ARG, arg),
            (reg::TRIG_WINDOW, window),
            (reg::TRIG_ACTION, self.action.code()),
            (reg::TRIG_SCOPE, self.scope.code()),
            (reg::TRIG_ARM, 1),
        ]
    }
}

pub fn parse_trigger_file(text: &str) -> Result<Vec<TriggerSpec>, InvalidTrigger> {
    let list: Vec<TriggerSpec> =
        serde_json::from_str(text).map_err(|e| InvalidTrigger(e.to_string()))?;
    for t in &list {
        t.check()?;
    }
    Ok(list)
}
