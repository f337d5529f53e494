// SPDX-License-Identifier: Apache-2.0

//! A complete simulated platform: mesh, tiles and the optional debug
//! fabric, advanced together one cycle at a time.
//!
//! Order within a cycle:
//!
//! 1. each adapter offers at most one flit to its router,
//! 2. the mesh advances,
//! 3. adapters consume ejected flits,
//! 4. cores execute one instruction (or stall),
//! 5. debug modules observe the cycle and the ring advances.
//!
//! When the fabric was created gated, steps 1 to 4 are frozen until the
//! host writes the external interface's RUN register.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::debug::{ChipLink, DebugFabric, TraceEvent};
use crate::mem::Memory;
use crate::na::{NaStats, NetworkAdapter, TileBus};
use crate::noc::{MeshNetwork, NocError, Port};
use crate::pe::{CoreState, FaultEvent, ProgramImage, StepOutcome};
use crate::platform::{ConfigError, PlatformConfiguration};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemOptions {
    /// Hold the functional system at cycle 0 until the host sets RUN.
    pub gated: bool,
    /// Keep a copy of every trace event emitted by debug modules.
    pub emission_log: bool,
    /// Recorded in the statistics; the simulation itself is deterministic.
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Noc(#[from] NocError),
    #[error("waiting for RUN but no host link is attached")]
    FrozenWithoutHost,
    #[error("host link closed before the run was released")]
    HostGone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepState {
    Advanced,
    /// Gated: only the debug fabric moved.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Tile {
    core: CoreState,
    mem: Memory,
    na: NetworkAdapter,
    fault: Option<FaultEvent>,
}

pub struct SystemInstance {
    config: PlatformConfiguration,
    options: SystemOptions,
    mesh: MeshNetwork,
    tiles: Vec<Tile>,
    debug: Option<DebugFabric>,
    link: Option<ChipLink>,
    cycle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PortCounts {
    pub north: u64,
    pub east: u64,
    pub south: u64,
    pub west: u64,
    pub local: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouterStats {
    pub id: usize,
    pub coord: [usize; 2],
    pub flits: PortCounts,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultStats {
    pub kind: u16,
    pub pc: u32,
    pub addr: u32,
    pub cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileStats {
    pub id: usize,
    pub retired: u64,
    pub halted: bool,
    pub pc: u32,
    pub fault: Option<FaultStats>,
    #[serde(flatten)]
    pub na: NaStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub retired: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub flits_injected: u64,
    pub flits_ejected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemStats {
    pub seed: u64,
    pub cycles: u64,
    pub all_halted: bool,
    pub routers: Vec<RouterStats>,
    pub tiles: Vec<TileStats>,
    pub totals: Totals,
}

/// Everything the program-visible system consists of, for comparisons
/// between runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalState {
    pub cycle: u64,
    pub cores: Vec<CoreState>,
    pub memories: Vec<Vec<u32>>,
    pub stats: SystemStats,
}

impl SystemInstance {
    pub fn new(
        config: &PlatformConfiguration,
        programs: &BTreeMap<usize, ProgramImage>,
        options: SystemOptions,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let n = config.num_tiles();
        if let Some(&tile) = programs.keys().find(|&&t| t >= n) {
            return Err(ConfigError::Program {
                tile,
                message: format!("no such tile (system has {n})"),
            });
        }
        let halt = ProgramImage::halt();
        let mut tiles = Vec::with_capacity(n);
        for (i, entry) in config.tiles.iter().enumerate() {
            let image = programs.get(&i).unwrap_or(&halt);
            let mut mem = Memory::new(entry.memory_bytes as usize);
            mem.load_image(image)
                .map_err(|message| ConfigError::Program { tile: i, message })?;
            tiles.push(Tile {
                core: CoreState::new(image.base),
                mem,
                na: NetworkAdapter::new(i, n, entry.memory_bytes, config.tile_org(i)),
                fault: None,
            });
        }
        let debug = config.debug_layout().map(|layout| {
            let mut fabric = DebugFabric::new(&layout, options.gated);
            if options.emission_log {
                fabric.enable_emission_log();
            }
            fabric
        });
        Ok(SystemInstance {
            config: config.clone(),
            mesh: MeshNetwork::new(
                config.mesh.width as usize,
                config.mesh.height as usize,
                config.router_config(),
            ),
            options,
            tiles,
            debug,
            link: None,
            cycle: 0,
        })
    }

    pub fn config(&self) -> &PlatformConfiguration {
        &self.config
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn num_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn mesh(&self) -> &MeshNetwork {
        &self.mesh
    }

    pub fn core(&self, tile: usize) -> &CoreState {
        &self.tiles[tile].core
    }

    pub fn memory(&self, tile: usize) -> &Memory {
        &self.tiles[tile].mem
    }

    pub fn memory_mut(&mut self, tile: usize) -> &mut Memory {
        &mut self.tiles[tile].mem
    }

    pub fn adapter(&self, tile: usize) -> &NetworkAdapter {
        &self.tiles[tile].na
    }

    pub fn adapter_mut(&mut self, tile: usize) -> &mut NetworkAdapter {
        &mut self.tiles[tile].na
    }

    pub fn fault(&self, tile: usize) -> Option<&FaultEvent> {
        self.tiles[tile].fault.as_ref()
    }

    pub fn debug(&self) -> Option<&DebugFabric> {
        self.debug.as_ref()
    }

    pub fn debug_mut(&mut self) -> Option<&mut DebugFabric> {
        self.debug.as_mut()
    }

    /// Connect the external interface to a host. Without a debug fabric
    /// the link is ignored.
    pub fn attach_link(&mut self, link: ChipLink) {
        self.link = Some(link);
    }

    pub fn take_emission_log(&mut self) -> Vec<TraceEvent> {
        self.debug
            .as_mut()
            .map(DebugFabric::take_emission_log)
            .unwrap_or_default()
    }

    pub fn all_halted(&self) -> bool {
        self.tiles.iter().all(|t| t.core.halted)
    }

    /// All cores halted and no traffic left in the network or adapters.
    pub fn is_quiescent(&self) -> bool {
        self.all_halted() && self.mesh.is_idle() && self.tiles.iter().all(|t| t.na.is_idle())
    }

    pub fn is_running(&self) -> bool {
        self.debug.as_ref().is_none_or(DebugFabric::run_enabled)
    }

    /// Advance one cycle.
    pub fn step(&mut self) -> Result<StepState, SimError> {
        if !self.is_running() {
            self.tick_debug();
            return Ok(StepState::Frozen);
        }
        let cycle = self.cycle;

        let injections: Vec<_> = self
            .tiles
            .iter_mut()
            .enumerate()
            .map(|(i, t)| {
                let mesh = &self.mesh;
                t.na.next_injection(|vc| mesh.can_inject(i, vc))
            })
            .collect();
        let ejections = self.mesh.tick(&injections)?;
        #[cfg(debug_assertions)]
        if let Err(e) = self.mesh.check_invariants() {
            panic!("mesh invariant violated at cycle {cycle}: {e}");
        }
        for (t, flit) in self.tiles.iter_mut().zip(ejections) {
            if let Some(f) = flit {
                t.na.receive_flit(f, &mut t.mem);
            }
        }

        for (i, t) in self.tiles.iter_mut().enumerate() {
            if t.core.halted {
                continue;
            }
            let mut bus = TileBus {
                mem: &mut t.mem,
                na: &mut t.na,
            };
            match t.core.step(&mut bus, cycle) {
                StepOutcome::Retired(r) => {
                    if let Some(d) = self.debug.as_mut() {
                        d.observe_retire(i, r.pc, cycle);
                    }
                }
                StepOutcome::Fault(f) => {
                    t.fault = Some(f);
                    if let Some(d) = self.debug.as_mut() {
                        d.observe_fault(i, f.kind.code(), f.pc, f.addr, cycle);
                    }
                }
                StepOutcome::Stalled | StepOutcome::Halted => {}
            }
        }

        for (i, t) in self.tiles.iter_mut().enumerate() {
            let events = t.na.drain_events();
            if let Some(d) = self.debug.as_mut() {
                for e in events {
                    d.observe_na(i, e.kind as u16, e.a, e.b, cycle);
                }
            }
        }
        if let Some(d) = self.debug.as_mut() {
            for r in 0..self.tiles.len() {
                d.observe_departures(r, self.mesh.last_departures(r), cycle);
            }
        }
        self.tick_debug();
        self.cycle += 1;
        Ok(StepState::Advanced)
    }

    fn tick_debug(&mut self) {
        let Some(d) = self.debug.as_mut() else {
            return;
        };
        if let Some(link) = self.link.as_mut() {
            for pkt in link.poll() {
                d.host_send(pkt);
            }
        }
        d.tick(self.cycle);
        // Without a host, packets leaving the external interface are dropped.
        while let Some(pkt) = d.host_recv() {
            if let Some(link) = self.link.as_mut() {
                link.send(&pkt);
            }
        }
    }

    /// Run until `max_cycles` cycles have executed or the system is
    /// quiescent. While gated, waits for the host (sleeping briefly when
    /// the ring is idle) without counting cycles.
    pub fn run(&mut self, max_cycles: u64) -> Result<u64, SimError> {
        while self.cycle < max_cycles && !self.is_quiescent() {
            if self.step()? == StepState::Frozen {
                let Some(link) = self.link.as_ref() else {
                    return Err(SimError::FrozenWithoutHost);
                };
                if link.peer_closed() {
                    return Err(SimError::HostGone);
                }
                if self.debug.as_ref().is_some_and(DebugFabric::is_drained) {
                    std::thread::sleep(Duration::from_micros(200));
                }
            }
        }
        Ok(self.cycle)
    }

    /// Flush partial trace records and deliver every queued debug packet
    /// to the host, then close the link so the host sees end of stream.
    pub fn finish(&mut self) {
        if let Some(d) = self.debug.as_mut() {
            d.finish(self.cycle);
        }
        while self.debug.as_ref().is_some_and(|d| !d.is_drained()) {
            self.tick_debug();
        }
        if let Some(mut link) = self.link.take() {
            link.close();
        }
    }

    pub fn stats(&self) -> SystemStats {
        let routers: Vec<RouterStats> = (0..self.tiles.len())
            .map(|r| {
                let c = self.mesh.router(r).coord();
                let d = |p| self.mesh.departures(r, p);
                let flits = PortCounts {
                    north: d(Port::North),
                    east: d(Port::East),
                    south: d(Port::South),
                    west: d(Port::West),
                    local: d(Port::Local),
                };
                RouterStats {
                    id: r,
                    coord: [c.x, c.y],
                    total: Port::ALL.iter().map(|&p| d(p)).sum(),
                    flits,
                }
            })
            .collect();
        let tiles: Vec<TileStats> = self
            .tiles
            .iter()
            .enumerate()
            .map(|(i, t)| TileStats {
                id: i,
                retired: t.core.retired,
                halted: t.core.halted,
                pc: t.core.pc,
                fault: t.fault.map(|f| FaultStats {
                    kind: f.kind.code(),
                    pc: f.pc,
                    addr: f.addr,
                    cycle: f.cycle,
                }),
                na: t.na.stats(),
            })
            .collect();
        let totals = Totals {
            retired: tiles.iter().map(|t| t.retired).sum(),
            messages_sent: tiles.iter().map(|t| t.na.messages_sent).sum(),
            messages_received: tiles.iter().map(|t| t.na.messages_received).sum(),
            flits_injected: self.mesh.injected(),
            flits_ejected: self.mesh.ejected(),
        };
        SystemStats {
            seed: self.options.seed,
            cycles: self.cycle,
            all_halted: self.all_halted(),
            routers,
            tiles,
            totals,
        }
    }

    pub fn functional_state(&self) -> FunctionalState {
        FunctionalState {
            cycle: self.cycle,
            cores: self.tiles.iter().map(|t| t.core.clone()).collect(),
            memories: self.tiles.iter().map(|t| t.mem.words().to_vec()).collect(),
            stats: self.stats(),
        }
    }
}
