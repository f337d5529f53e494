// SPDX-License-Identifier: Apache-2.0

//! Trigger conditions and the per-module trigger unit.

use super::ModuleType;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    /// A retirement at exactly this pc.
    PcEquals(u32),
    /// The module's lifetime observation count reaches `n`.
    EventCountReaches(u32),
    /// Busiest output link carried more than `fraction` of the cycles of a
    /// `window`-cycle window.
    LinkLoadAbove { fraction: f32, window: u32 },
}

impl Condition {
    pub fn code(&self) -> u16 {
        match self {
            Condition::PcEquals(_) => 1,
            Condition::EventCountReaches(_) => 2,
            Condition::LinkLoadAbove { .. } => 3,
        }
    }

    /// Whether a module of type `t` can evaluate this condition.
    pub fn compatible_with(&self, t: ModuleType) -> bool {
        match self {
            Condition::PcEquals(_) => t == ModuleType::CoreTrace,
            Condition::EventCountReaches(_) => t != ModuleType::Extif,
            Condition::LinkLoadAbove { .. } => t == ModuleType::NocStat,
        }
    }

    /// (TRIG_COND, TRIG_ARG, TRIG_WINDOW) register values.
    pub fn registers(&self) -> (u32, u32, u32) {
        match *self {
            Condition::PcEquals(pc) => (1, pc, 0),
            Condition::EventCountReaches(n) => (2, n, 0),
            Condition::LinkLoadAbove { fraction, window } => (3, fraction.to_bits(), window),
        }
    }

    pub fn from_registers(cond: u32, arg: u32, window: u32) -> Option<Condition> {
        match cond {
            1 => Some(Condition::PcEquals(arg)),
            2 => Some(Condition::EventCountReaches(arg)),
            3 => {
                let fraction = f32::from_bits(arg);
                ((0.0..=1.0).contains(&fraction) && window > 0)
                    .then_some(Condition::LinkLoadAbove { fraction, window })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    StartCollection = 1,
    StopCollection = 2,
}

impl Action {
    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(Action::StartCollection),
            2 => Some(Action::StopCollection),
            _ => None,
        }
    }

    pub fn enables(self) -> bool {
        self == Action::StartCollection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    Local = 0,
    Global = 1,
}

impl Scope {
    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Scope::Local),
            1 => Some(Scope::Global),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerSpec {
    pub condition: Condition,
    pub action: Action,
    pub scope: Scope,
}

/// What a module saw this cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Retire {
        pc: u32,
    },
    /// Observation count moved from `before` to `after`.
    EventCount {
        before: u64,
        after: u64,
    },
    /// Busiest port's flit count over a closed window of `window` cycles.
    LinkLoad {
        count: u32,
        window: u32,
    },
}

/// Whether `cond` fires on `obs`. Mismatched pairs never fire.
pub fn eval_trigger(cond: &Condition, obs: &Observation) -> bool {
    match (cond, obs) {
        (Condition::PcEquals(a), Observation::Retire { pc }) => a == pc,
        (Condition::EventCountReaches(n), Observation::EventCount { before, after }) => {
            *before < *n as u64 && *after >= *n as u64
        }
        (Condition::LinkLoadAbove { fraction, .. }, Observation::LinkLoad { count, window }) => {
            // Exact comparison count / window > fraction.
            *count as f64 > *fraction as f64 * *window as f64
        }
        _ => false,
    }
}

/// Register-level trigger state of one module. Triggers are one-shot: a
/// fired trigger stays inactive until armed again.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriggerUnit {
    pub cond: u32,
    pub arg: u32,
    pub window: u32,
    pub action: u32,
    pub scope: u32,
    armed: bool,
    fired: bool,
    load: [u32; 5],
    load_cycles: u32,
}

impl TriggerUnit {
    pub fn spec(&self) -> Option<TriggerSpec> {
        Some(TriggerSpec {
            condition: Condition::from_registers(self.cond, self.arg, self.window)?,
            action: Action::from_code(self.action)?,
            scope: Scope::from_code(self.scope)?,
        })
    }

    pub fn set_spec(&mut self, spec: &TriggerSpec) {
        let (c, a, w) = spec.condition.registers();
        self.cond = c;
        self.arg = a;
        self.window = w;
        self.action = spec.action as u32;
        self.scope = spec.scope as u32;
    }

    /// Arm if the programmed trigger is valid for module type `t`.
    pub fn arm(&mut self, t: ModuleType) -> bool {
        let ok = self.spec().is_some_and(|s| s.condition.compatible_with(t));
        self.armed = ok;
        self.fired = false;
        self.load = [0; 5];
        self.load_cycles = 0;
        ok
    }

    pub fn disarm(&mut self) {
        self.armed = false;
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn has_fired(&self) -> bool {
        self.fired
    }

    fn check(&mut self, obs: Observation) -> Option<TriggerSpec> {
        if !self.armed {
            return None;
        }
        let spec = self.spec()?;
        if eval_trigger(&spec.condition, &obs) {
            self.armed = false;
            self.fired = true;
            Some(spec)
        } else {
            None
        }
    }

    pub fn on_retire(&mut self, pc: u32) -> Option<TriggerSpec> {
        self.check(Observation::Retire { pc })
    }

    pub fn on_count(&mut self, before: u64, after: u64) -> Option<TriggerSpec> {
        if before == after {
            return None;
        }
        self.check(Observation::EventCount { before, after })
    }

    /// Accumulate one cycle of link departures for a load condition.
    pub fn on_departures(&mut self, departures: [bool; 5]) -> Option<TriggerSpec> {
        if !self.armed || self.cond != 3 || self.window == 0 {
            return None;
        }
        for (c, d) in self.load.iter_mut().zip(departures) {
            *c += d as u32;
        }
        self.load_cycles += 1;
        if self.load_cycles < self.window {
            return None;
        }
        let count = *self.load.iter().max().unwrap();
        self.load = [0; 5];
        self.load_cycles = 0;
        self.check(Observation::LinkLoad {
            count,
            window: self.window,
        })
    }
}
