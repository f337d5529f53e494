// SPDX-License-Identifier: Apache-2.0

//! One debug ring node: registers, trigger unit and event generation.

use std::collections::VecDeque;

use super::compress::ItraceCompressor;
use super::nocstat::NocStatCounter;
use super::trigger::{Action, Scope, TriggerSpec, TriggerUnit};
use super::{
    ptype, reg, CrossTrigger, DebugPacket, Descriptor, EventBody, ModuleType, TraceEvent,
    TriggerNote, BROADCAST_ID,
};
use crate::noc::ring::{ring_flits, RingFlit, CONTROL_VC, TRACE_VC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TxFlit {
    pub flit: RingFlit,
    /// Index of the cross-trigger record whose broadcast ends with this flit.
    pub cross: Option<usize>,
}

pub(crate) struct Ctx<'a> {
    pub cycle: u64,
    pub log: &'a mut Option<Vec<TraceEvent>>,
    pub cross: &'a mut Vec<CrossTrigger>,
}

#[derive(Debug, Clone)]
pub(crate) struct Module {
    pub desc: Descriptor,
    pub enabled: bool,
    pub trig_in: bool,
    pub observations: u64,
    pub emitted: u64,
    pub trigger: TriggerUnit,
    compressor: ItraceCompressor,
    nocstat: Option<NocStatCounter>,
    /// External interface only.
    pub run: bool,
    pub tx: [VecDeque<TxFlit>; 2],
    pub rx: [Vec<u16>; 2],
}

impl Module {
    pub fn new(desc: Descriptor, nocstat_window: u32) -> Self {
        let nocstat = (desc.module_type == ModuleType::NocStat).then(|| {
            NocStatCounter::new((desc.attach >> 8) as u8, desc.attach as u8, nocstat_window)
        });
        Module {
            desc,
            enabled: false,
            trig_in: true,
            observations: 0,
            emitted: 0,
            trigger: TriggerUnit::default(),
            compressor: ItraceCompressor::new(),
            nocstat,
            run: true,
            tx: Default::default(),
            rx: Default::default(),
        }
    }

    pub fn id(&self) -> u8 {
        self.desc.id
    }

    pub fn tx_empty(&self) -> bool {
        self.tx.iter().all(VecDeque::is_empty)
    }

    fn emit(&mut self, ctx: &mut Ctx, body: EventBody) {
        let ev = TraceEvent {
            module: self.id(),
            timestamp: ctx.cycle as u32,
            body,
        };
        let flits = ev
            .to_packet()
            .to_flits()
            .expect("event bodies fit a packet");
        self.tx[TRACE_VC as usize].extend(
            ring_flits(&flits, TRACE_VC)
                .into_iter()
                .map(|flit| TxFlit { flit, cross: None }),
        );
        self.emitted += 1;
        if let Some(log) = ctx.log.as_mut() {
            log.push(ev);
        }
    }

    pub fn send_control(&mut self, pkt: &DebugPacket, cross: Option<usize>) {
        let flits = pkt.to_flits().expect("control packets fit");
        let n = flits.len();
        self.tx[CONTROL_VC as usize].extend(
            ring_flits(&flits, CONTROL_VC)
                .into_iter()
                .enumerate()
                .map(|(i, flit)| TxFlit {
                    flit,
                    cross: if i + 1 == n { cross } else { None },
                }),
        );
    }

    fn flush_itrace(&mut self, ctx: &mut Ctx) {
        if let Some(r) = self.compressor.flush() {
            self.emit(ctx, EventBody::Itrace(r));
        }
    }

    /// Change collection state. A trigger-caused change is reported with a
    /// TRIGGER event; no change means no event.
    pub fn set_collection(&mut self, ctx: &mut Ctx, on: bool, note: Option<TriggerNote>) -> bool {
        if on == self.enabled || self.desc.module_type == ModuleType::Extif {
            return false;
        }
        if !on {
            self.flush_itrace(ctx);
        }
        self.enabled = on;
        self.compressor = ItraceCompressor::new();
        if let Some(n) = note {
            self.emit(ctx, EventBody::Trigger(n));
        }
        true
    }

    fn fire(&mut self, ctx: &mut Ctx, spec: TriggerSpec) {
        let note = TriggerNote {
            action: spec.action,
            scope: spec.scope,
            origin: self.id(),
            cause: spec.condition.code(),
        };
        self.set_collection(ctx, spec.action.enables(), Some(note));
        if spec.scope == Scope::Global {
            let pkt = DebugPacket {
                dest: BROADCAST_ID,
                src: self.id(),
                ptype: ptype::TRIGGER,
                timestamp: ctx.cycle as u32,
                body: vec![
                    note.action as u16,
                    note.scope as u16,
                    note.origin as u16,
                    note.cause,
                ],
            };
            ctx.cross.push(CrossTrigger {
                origin: self.id(),
                action: spec.action,
                fired_at: ctx.cycle,
                tail_injected_at: None,
                applied: Vec::new(),
            });
            let idx = ctx.cross.len() - 1;
            self.send_control(&pkt, Some(idx));
        }
    }

    pub fn observe_retire(&mut self, ctx: &mut Ctx, pc: u32) {
        let before = self.observations;
        self.observations += 1;
        let fired = self
            .trigger
            .on_retire(pc)
            .or_else(|| self.trigger.on_count(before, self.observations));
        if let Some(spec) = fired {
            self.fire(ctx, spec);
        }
        if self.enabled {
            if let Some(r) = self.compressor.push(pc) {
                self.emit(ctx, EventBody::Itrace(r));
            }
        }
    }

    pub fn observe_fault(&mut self, ctx: &mut Ctx, kind: u16, pc: u32, addr: u32) {
        if self.enabled {
            self.flush_itrace(ctx);
        }
        self.emit(ctx, EventBody::Fault { kind, pc, addr });
    }

    pub fn observe_na(&mut self, ctx: &mut Ctx, kind: u16, a: u16, b: u16) {
        if self.enabled {
            self.emit(ctx, EventBody::Na { kind, a, b });
        }
    }

    pub fn observe_departures(&mut self, ctx: &mut Ctx, departures: [bool; 5]) {
        let before = self.observations;
        self.observations += departures.iter().filter(|&&d| d).count() as u64;
        let fired = self
            .trigger
            .on_count(before, self.observations)
            .or_else(|| self.trigger.on_departures(departures));
        if let Some(spec) = fired {
            self.fire(ctx, spec);
        }
        let rec = self
            .nocstat
            .as_mut()
            .and_then(|c| c.tick(departures, ctx.cycle));
        if let (Some(rec), true) = (rec, self.enabled) {
            self.emit(ctx, EventBody::NocStat(rec));
        }
    }

    pub fn flush(&mut self, ctx: &mut Ctx) {
        if self.enabled {
            self.flush_itrace(ctx);
        }
    }

    pub fn read_reg(&self, r: u16, cycle: u64) -> u32 {
        let extif = self.desc.module_type == ModuleType::Extif;
        match r {
            reg::DESCRIPTOR => self.desc.word(),
            reg::ENABLE => self.enabled as u32,
            reg::TRIG_IN_ENABLE => self.trig_in as u32,
            reg::EVENT_COUNT => self.observations as u32,
            reg::EMITTED => self.emitted as u32,
            reg::TRIG_COND => self.trigger.cond,
            reg::TRIG_ARG => self.trigger.arg,
            reg::TRIG_WINDOW => self.trigger.window,
            reg::TRIG_ACTION => self.trigger.action,
            reg::TRIG_SCOPE => self.trigger.scope,
            reg::TRIG_ARM => self.trigger.is_armed() as u32,
            reg::TRIG_FIRED => self.trigger.has_fired() as u32,
            reg::NOCSTAT_WINDOW => self.nocstat.as_ref().map_or(0, |c| c.window_len()),
            reg::RUN if extif => self.run as u32,
            reg::CYCLE_LO if extif => cycle as u32,
            reg::CYCLE_HI if extif => (cycle >> 32) as u32,
            _ => 0,
        }
    }

    pub fn write_reg(&mut self, ctx: &mut Ctx, r: u16, v: u32) {
        match r {
            reg::ENABLE => {
                self.set_collection(ctx, v != 0, None);
            }
            reg::TRIG_IN_ENABLE => self.trig_in = v != 0,
            reg::TRIG_COND => self.trigger.cond = v,
            reg::TRIG_ARG => self.trigger.arg = v,
            reg::TRIG_WINDOW => self.trigger.window = v,
            reg::TRIG_ACTION => self.trigger.action = v,
            reg::TRIG_SCOPE => self.trigger.scope = v,
            reg::TRIG_ARM => {
                if v != 0 {
                    self.trigger.arm(self.desc.module_type);
                } else {
                    self.trigger.disarm();
                }
            }
            reg::NOCSTAT_WINDOW => {
                if let Some(c) = self.nocstat.as_mut() {
                    c.set_window_len(v);
                }
            }
            reg::RUN if self.desc.module_type == ModuleType::Extif => self.run = v != 0,
            _ => {}
        }
    }

    /// Handle a fully received packet. Returns a reply, if any.
    pub fn handle(&mut self, ctx: &mut Ctx, pkt: &DebugPacket) -> Option<DebugPacket> {
        let (me, ts, to) = (self.id(), ctx.cycle as u32, pkt.src);
        let reply = move |body: Vec<u16>| DebugPacket {
            dest: to,
            src: me,
            ptype: ptype::REG_VALUE,
            timestamp: ts,
            body,
        };
        match pkt.ptype {
            ptype::TRIGGER if pkt.body.len() == 4 => {
                if !self.trig_in || self.desc.module_type == ModuleType::Extif {
                    return None;
                }
                let action = Action::from_code(pkt.body[0] as u32)?;
                let note = TriggerNote {
                    action,
                    scope: Scope::from_code(pkt.body[1] as u32)?,
                    origin: pkt.body[2] as u8,
                    cause: pkt.body[3],
                };
                self.set_collection(ctx, action.enables(), Some(note));
                if let Some(rec) = ctx.cross.iter_mut().rev().find(|c| c.origin == note.origin) {
                    rec.applied.push((self.id(), ctx.cycle));
                }
                None
            }
            ptype::DISCOVER => {
                let w = self.desc.word();
                Some(reply(vec![reg::DESCRIPTOR, (w >> 16) as u16, w as u16]))
            }
            ptype::REG_READ if !pkt.body.is_empty() => {
                let r = pkt.body[0];
                let v = self.read_reg(r, ctx.cycle);
                Some(reply(vec![r, (v >> 16) as u16, v as u16]))
            }
            ptype::REG_WRITE if pkt.body.len() == 3 => {
                let v = (pkt.body[1] as u32) << 16 | pkt.body[2] as u32;
                self.write_reg(ctx, pkt.body[0], v);
                None
            }
            _ => None,
        }
    }
}
