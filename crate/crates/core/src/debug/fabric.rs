// SPDX-License-Identifier: Apache-2.0

//! The assembled debug system: modules, ring and external interface.

use std::collections::VecDeque;

use super::module::{Ctx, Module};
use super::trigger::{Action, TriggerSpec};
use super::{
    ptype, reg, DebugPacket, Descriptor, ModuleType, TraceEvent, BROADCAST_ID, EXTIF_ID,
    MODULE_VERSION,
};
use crate::noc::ring::{RingFlit, RingNetwork, CONTROL_VC, TRACE_VC};

pub const RING_DEPTH: usize = 4;

/// What the fabric is attached to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebugLayout {
    pub tiles: usize,
    /// Router coordinates in router order.
    pub routers: Vec<(u8, u8)>,
    pub nocstat_window: u32,
}

impl DebugLayout {
    pub fn module_count(&self) -> usize {
        1 + self.tiles + self.routers.len()
    }

    pub fn descriptors(&self) -> Vec<Descriptor> {
        let n = self.module_count();
        let mut out = vec![Descriptor {
            id: EXTIF_ID,
            module_type: ModuleType::Extif,
            version: MODULE_VERSION,
            attach: n as u16,
        }];
        for t in 0..self.tiles {
            out.push(Descriptor {
                id: (1 + t) as u8,
                module_type: ModuleType::CoreTrace,
                version: MODULE_VERSION,
                attach: t as u16,
            });
        }
        for (r, &(x, y)) in self.routers.iter().enumerate() {
            out.push(Descriptor {
                id: (1 + self.tiles + r) as u8,
                module_type: ModuleType::NocStat,
                version: MODULE_VERSION,
                attach: (x as u16) << 8 | y as u16,
            });
        }
        out
    }
}

/// One global cross-trigger: when it fired, when its broadcast finished
/// entering the ring, and when each module applied it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTrigger {
    pub origin: u8,
    pub action: Action,
    pub fired_at: u64,
    pub tail_injected_at: Option<u64>,
    pub applied: Vec<(u8, u64)>,
}

pub struct DebugFabric {
    ring: RingNetwork,
    modules: Vec<Module>,
    tiles: usize,
    to_host: VecDeque<Vec<u16>>,
    from_host: VecDeque<Vec<u16>>,
    log: Option<Vec<TraceEvent>>,
    cross: Vec<CrossTrigger>,
    malformed: u64,
    forwarded: u64,
}

impl DebugFabric {
    /// With `gated`, the external interface holds the functional system
    /// until the host writes RUN = 1.
    pub fn new(layout: &DebugLayout, gated: bool) -> Self {
        let descs = layout.descriptors();
        assert!(
            descs.len() < BROADCAST_ID as usize,
            "too many debug modules"
        );
        let mut modules: Vec<Module> = descs
            .into_iter()
            .map(|d| Module::new(d, layout.nocstat_window))
            .collect();
        modules[0].run = !gated;
        DebugFabric {
            ring: RingNetwork::new(modules.len(), RING_DEPTH),
            modules,
            tiles: layout.tiles,
            to_host: VecDeque::new(),
            from_host: VecDeque::new(),
            log: None,
            cross: Vec::new(),
            malformed: 0,
            forwarded: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn descriptors(&self) -> Vec<Descriptor> {
        self.modules.iter().map(|m| m.desc).collect()
    }

    pub fn core_module(&self, tile: usize) -> u8 {
        (1 + tile) as u8
    }

    pub fn router_module(&self, router: usize) -> u8 {
        (1 + self.tiles + router) as u8
    }

    pub fn run_enabled(&self) -> bool {
        self.modules[0].run
    }

    /// Record every emitted trace event from now on.
    pub fn enable_emission_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn emission_log(&self) -> &[TraceEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_emission_log(&mut self) -> Vec<TraceEvent> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn cross_triggers(&self) -> &[CrossTrigger] {
        &self.cross
    }

    pub fn ring(&self) -> &RingNetwork {
        &self.ring
    }

    pub fn is_collecting(&self, module: u8) -> bool {
        self.modules[module as usize].enabled
    }

    /// Host packets that could not be parsed.
    pub fn malformed_host_packets(&self) -> u64 {
        self.malformed
    }

    /// Packets handed to the host so far.
    pub fn forwarded_packets(&self) -> u64 {
        self.forwarded
    }

    fn with_module<R>(
        &mut self,
        id: u8,
        cycle: u64,
        f: impl FnOnce(&mut Module, &mut Ctx) -> R,
    ) -> R {
        let mut ctx = Ctx {
            cycle,
            log: &mut self.log,
            cross: &mut self.cross,
        };
        f(&mut self.modules[id as usize], &mut ctx)
    }

    pub fn observe_retire(&mut self, tile: usize, pc: u32, cycle: u64) {
        let id = self.core_module(tile);
        self.with_module(id, cycle, |m, ctx| m.observe_retire(ctx, pc));
    }

    pub fn observe_fault(&mut self, tile: usize, kind: u16, pc: u32, addr: u32, cycle: u64) {
        let id = self.core_module(tile);
        self.with_module(id, cycle, |m, ctx| m.observe_fault(ctx, kind, pc, addr));
    }

    pub fn observe_na(&mut self, tile: usize, kind: u16, a: u16, b: u16, cycle: u64) {
        let id = self.core_module(tile);
        self.with_module(id, cycle, |m, ctx| m.observe_na(ctx, kind, a, b));
    }

    pub fn observe_departures(&mut self, router: usize, departures: [bool; 5], cycle: u64) {
        let id = self.router_module(router);
        self.with_module(id, cycle, |m, ctx| m.observe_departures(ctx, departures));
    }

    /// Direct register access, equivalent to a host REG_WRITE arriving.
    pub fn write_register(&mut self, module: u8, r: u16, value: u32, cycle: u64) {
        self.with_module(module, cycle, |m, ctx| m.write_reg(ctx, r, value));
    }

    pub fn read_register(&self, module: u8, r: u16, cycle: u64) -> u32 {
        self.modules[module as usize].read_reg(r, cycle)
    }

    /// Program and arm a trigger directly. Returns whether it armed.
    pub fn arm_trigger(&mut self, module: u8, spec: &TriggerSpec, cycle: u64) -> bool {
        self.modules[module as usize].trigger.set_spec(spec);
        self.write_register(module, reg::TRIG_ARM, 1, cycle);
        self.modules[module as usize].trigger.is_armed()
    }

    /// A packet from the host, as received by the external interface.
    pub fn host_send(&mut self, flits: Vec<u16>) {
        self.from_host.push_back(flits);
    }

    /// Next packet for the host.
    pub fn host_recv(&mut self) -> Option<Vec<u16>> {
        self.to_host.pop_front()
    }

    /// Emit pending partial records; called once at the end of a run.
    pub fn finish(&mut self, cycle: u64) {
        for id in 0..self.modules.len() {
            self.with_module(id as u8, cycle, |m, ctx| m.flush(ctx));
        }
    }

    /// No packet queued, on the ring or waiting for the host side.
    pub fn is_drained(&self) -> bool {
        self.ring.is_empty()
            && self.from_host.is_empty()
            && self.to_host.is_empty()
            && self.modules.iter().all(Module::tx_empty)
            && self.modules.iter().all(|m| m.rx.iter().all(Vec::is_empty))
    }

    fn forward_to_host(&mut self, pkt: &DebugPacket) {
        self.to_host.push_back(pkt.to_flits().expect("packet fits"));
        self.forwarded += 1;
    }

    fn handle_host_packets(&mut self, cycle: u64) {
        while let Some(flits) = self.from_host.pop_front() {
            let Ok(mut pkt) = DebugPacket::from_flits(&flits) else {
                self.malformed += 1;
                continue;
            };
            // Replies and broadcasts must come back to the interface.
            pkt.src = EXTIF_ID;
            pkt.timestamp = cycle as u32;
            if pkt.dest == EXTIF_ID {
                let reply = self.with_module(EXTIF_ID, cycle, |m, ctx| m.handle(ctx, &pkt));
                if let Some(r) = reply {
                    self.forward_to_host(&r);
                }
                if pkt.ptype == ptype::DISCOVER {
                    let bcast = DebugPacket {
                        dest: BROADCAST_ID,
                        ..pkt
                    };
                    self.modules[0].send_control(&bcast, None);
                }
            } else {
                self.modules[0].send_control(&pkt, None);
            }
        }
    }

    /// Advance the debug system one cycle.
    pub fn tick(&mut self, cycle: u64) {
        self.handle_host_packets(cycle);

        let n = self.modules.len();
        let mut injections: Vec<Option<RingFlit>> = vec![None; n];
        let mut chosen = vec![None; n];
        for (i, m) in self.modules.iter().enumerate() {
            for vc in [CONTROL_VC, TRACE_VC] {
                if let Some(tf) = m.tx[vc as usize].front() {
                    if self.ring.can_inject(i, vc) {
                        injections[i] = Some(tf.flit);
                        chosen[i] = Some(vc);
                        break;
                    }
                }
            }
        }
        let tick = self
            .ring
            .tick(&injections)
            .expect("injections are checked for space");
        for i in 0..n {
            if let (true, Some(vc)) = (tick.accepted[i], chosen[i]) {
                let tf = self.modules[i].tx[vc as usize].pop_front().unwrap();
                if let Some(idx) = tf.cross {
                    self.cross[idx].tail_injected_at = Some(cycle);
                }
            }
        }

        for d in tick.deliveries {
            let m = &mut self.modules[d.node];
            let buf = &mut m.rx[d.flit.vc as usize];
            buf.push(d.flit.data);
            if !d.flit.last {
                continue;
            }
            let flits = std::mem::take(buf);
            let Ok(pkt) = DebugPacket::from_flits(&flits) else {
                debug_assert!(false, "malformed ring packet");
                continue;
            };
            if d.node == EXTIF_ID as usize {
                if pkt.dest == EXTIF_ID {
                    self.forward_to_host(&pkt);
                }
                continue;
            }
            let reply = self.with_module(d.node as u8, cycle, |m, ctx| m.handle(ctx, &pkt));
            if let Some(r) = reply {
                self.modules[d.node].send_control(&r, None);
            }
        }
    }
}
