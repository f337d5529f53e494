// SPDX-License-Identifier: Apache-2.0

//! Fully expanded, instantiable platform configuration.
//!
//! Every tile, router and debug module is listed explicitly so that a
//! configuration can be written by hand and loaded without a description.
//! See `platforms/` in this crate for complete examples.

use serde::{Deserialize, Serialize};

use super::description::{NocParams, Org};
use super::{ConfigError, SCHEMA_VERSION};
use crate::debug::{DebugLayout, ModuleType, MODULE_VERSION};
use crate::na::{
    TileOrg, DMA_MAX_WORDS, DMA_SEGMENT_WORDS, DMA_SLOTS, MAX_MSG_WORDS, PORTS, RECV_QUEUE_DEPTH,
};
use crate::noc::{Coord, Port, RouterConfig, DATA_FLIT_WIDTH};
use crate::pe::{MMIO_BASE, MMIO_END};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshShape {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileEntry {
    pub id: u32,
    pub coord: [u32; 2],
    pub router: u32,
    pub memory_bytes: u32,
    pub org: Org,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_bytes: Option<u32>,
}

/// Neighbouring router id per mesh port; `local` names the attached tile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortWiring {
    pub north: Option<u32>,
    pub east: Option<u32>,
    pub south: Option<u32>,
    pub west: Option<u32>,
    pub local: u32,
}

impl PortWiring {
    fn get(&self, port: Port) -> Option<u32> {
        match port {
            Port::North => self.north,
            Port::East => self.east,
            Port::South => self.south,
            Port::West => self.west,
            Port::Local => Some(self.local),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterEntry {
    pub id: u32,
    pub coord: [u32; 2],
    pub ports: PortWiring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaParams {
    pub mmio_base: u32,
    pub mmio_size: u32,
    pub ports: u32,
    pub recv_queue_depth: u32,
    pub max_message_words: u32,
    pub dma_slots: u32,
    pub dma_max_words: u32,
    pub dma_segment_words: u32,
}

impl Default for NaParams {
    fn default() -> Self {
        NaParams {
            mmio_base: MMIO_BASE,
            mmio_size: MMIO_END - MMIO_BASE + 1,
            ports: PORTS as u32,
            recv_queue_depth: RECV_QUEUE_DEPTH as u32,
            max_message_words: MAX_MSG_WORDS as u32,
            dma_slots: DMA_SLOTS as u32,
            dma_max_words: DMA_MAX_WORDS,
            dma_segment_words: DMA_SEGMENT_WORDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DebugModuleKind {
    Extif,
    CoreTrace,
    NocStat,
}

impl DebugModuleKind {
    pub fn module_type(self) -> ModuleType {
        match self {
            DebugModuleKind::Extif => ModuleType::Extif,
            DebugModuleKind::CoreTrace => ModuleType::CoreTrace,
            DebugModuleKind::NocStat => ModuleType::NocStat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Attachment {
    Host { modules: u32 },
    Tile { tile: u32 },
    Router { router: u32, coord: [u32; 2] },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugModuleEntry {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: DebugModuleKind,
    pub version: u32,
    pub attach: Attachment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugConfig {
    pub enabled: bool,
    pub nocstat_window: u32,
    pub ring_depth: u32,
    pub modules: Vec<DebugModuleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Tile-local memory as seen by instruction fetch and, on
    /// distributed tiles, by loads and stores.
    Local,
    /// One tile's slice of the global data address space.
    Partition,
    /// Network adapter registers, present on every tile.
    Mmio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryRegion {
    pub kind: RegionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<u32>,
    pub base: u32,
    pub size: u32,
}

impl MemoryRegion {
    fn end(&self) -> u64 {
        self.base as u64 + self.size as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformConfiguration {
    pub schema_version: u32,
    pub mesh: MeshShape,
    pub noc: NocParams,
    pub network_adapter: NaParams,
    pub tiles: Vec<TileEntry>,
    pub routers: Vec<RouterEntry>,
    pub debug: DebugConfig,
    pub memory_map: Vec<MemoryRegion>,
}

fn bad(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(message.into())
}

impl PlatformConfiguration {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: PlatformConfiguration =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn num_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn router_config(&self) -> RouterConfig {
        RouterConfig {
            vcs: self.noc.vcs as usize,
            depth: self.noc.buffer_depth as usize,
        }
    }

    pub fn tile_org(&self, tile: usize) -> TileOrg {
        let t = &self.tiles[tile];
        match (t.org, t.partition_bytes) {
            (Org::Pgas, Some(p)) => TileOrg::Pgas { partition_bytes: p },
            _ => TileOrg::Distributed,
        }
    }

    /// Debug ring layout, or `None` when the fabric is disabled.
    pub fn debug_layout(&self) -> Option<DebugLayout> {
        self.debug.enabled.then(|| DebugLayout {
            tiles: self.tiles.len(),
            routers: self
                .routers
                .iter()
                .map(|r| (r.coord[0] as u8, r.coord[1] as u8))
                .collect(),
            nocstat_window: self.debug.nocstat_window,
        })
    }

    /// Check internal consistency: the tile, router and debug lists must
    /// describe exactly the mesh in `mesh`, every reference must resolve,
    /// and memory regions must not overlap.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("schema_version must be {SCHEMA_VERSION}")));
        }
        let (w, h) = (self.mesh.width as usize, self.mesh.height as usize);
        let n = w * h;
        if n == 0 || n > crate::noc::MAX_TILES {
            return Err(bad(format!("mesh {w}x{h} out of range")));
        }
        if self.noc.vcs < 3 || self.noc.vcs > 16 {
            return Err(bad("noc.vcs must be between 3 and 16"));
        }
        if self.noc.buffer_depth < 1 || self.noc.buffer_depth > 64 {
            return Err(bad("noc.buffer_depth must be between 1 and 64"));
        }
        if self.noc.flit_width != DATA_FLIT_WIDTH {
            return Err(bad("noc.flit_width must be 32"));
        }
        if self.network_adapter != NaParams::default() {
            return Err(bad(
                "network_adapter parameters differ from the supported adapter",
            ));
        }
        self.validate_routers(w, h)?;
        self.validate_tiles()?;
        self.validate_debug()?;
        self.validate_memory_map()
    }

    fn validate_routers(&self, w: usize, h: usize) -> Result<(), ConfigError> {
        let n = w * h;
        let mut seen = vec![false; n];
        for r in &self.routers {
            let [x, y] = r.coord;
            if x as usize >= w || y as usize >= h {
                return Err(bad(format!(
                    "router {} at ({x},{y}) is outside the mesh",
                    r.id
                )));
            }
            let id = Coord::new(x as usize, y as usize).tile(w);
            if r.id as usize != id {
                return Err(bad(format!(
                    "router at ({x},{y}) must have id {id}, not {}",
                    r.id
                )));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(bad(format!("duplicate router ({x},{y})")));
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            let c = Coord::of_tile(id, w);
            return Err(bad(format!("missing router ({},{})", c.x, c.y)));
        }
        for r in &self.routers {
            let here = Coord::new(r.coord[0] as usize, r.coord[1] as usize);
            for port in [Port::North, Port::East, Port::South, Port::West] {
                let expect = here.neighbor(port, w, h).map(|c| c.tile(w) as u32);
                if r.ports.get(port) != expect {
                    return Err(bad(format!(
                        "router {} port {} must connect to {:?}, found {:?}",
                        r.id,
                        port.name(),
                        expect,
                        r.ports.get(port)
                    )));
                }
            }
            if r.ports.local as usize >= n {
                return Err(bad(format!(
                    "router {} local port references missing tile {}",
                    r.id, r.ports.local
                )));
            }
        }
        Ok(())
    }

    fn validate_tiles(&self) -> Result<(), ConfigError> {
        let n = self.routers.len();
        if self.tiles.len() != n {
            return Err(bad(format!("{} tiles for {n} routers", self.tiles.len())));
        }
        for (i, t) in self.tiles.iter().enumerate() {
            if t.id as usize != i {
                return Err(bad(format!("tile at index {i} has id {}", t.id)));
            }
            let Some(r) = self.routers.iter().find(|r| r.id == t.router) else {
                return Err(bad(format!(
                    "tile {i} references missing router {}",
                    t.router
                )));
            };
            if r.coord != t.coord || r.ports.local != t.id || t.router as usize != i {
                return Err(bad(format!(
                    "tile {i} and router {} disagree on attachment",
                    r.id
                )));
            }
            let m = t.memory_bytes;
            if !m.is_power_of_two() || !(4096..=MMIO_BASE).contains(&m) {
                return Err(bad(format!("tile {i} memory_bytes {m} invalid")));
            }
            match (t.org, t.partition_bytes) {
                (Org::Distributed, None) => {}
                (Org::Pgas, Some(p)) if p.is_power_of_two() && p >= 4096 && p <= m => {}
                _ => return Err(bad(format!("tile {i} org and partition_bytes disagree"))),
            }
        }
        let first = &self.tiles[0];
        if self.tiles.iter().any(|t| {
            t.memory_bytes != first.memory_bytes
                || t.org != first.org
                || t.partition_bytes != first.partition_bytes
        }) {
            return Err(bad("all tiles must share memory size and organization"));
        }
        Ok(())
    }

    fn validate_debug(&self) -> Result<(), ConfigError> {
        let d = &self.debug;
        if !d.enabled {
            if !d.modules.is_empty() {
                return Err(bad("debug modules listed while debug is disabled"));
            }
            return Ok(());
        }
        if d.ring_depth as usize != crate::debug::RING_DEPTH {
            return Err(bad(format!(
                "debug.ring_depth must be {}",
                crate::debug::RING_DEPTH
            )));
        }
        if !(1..=u16::MAX as u32).contains(&d.nocstat_window) {
            return Err(bad("debug.nocstat_window must be between 1 and 65535"));
        }
        let expect = expected_modules(&self.tiles, &self.routers);
        if expect.len() > 255 {
            return Err(bad("too many debug modules"));
        }
        if d.modules.len() != expect.len() {
            return Err(bad(format!(
                "{} debug modules listed, {} required",
                d.modules.len(),
                expect.len()
            )));
        }
        for (got, want) in d.modules.iter().zip(&expect) {
            if got != want {
                return Err(bad(format!(
                    "debug module {} does not match the addressing rule (expected {:?})",
                    got.id, want
                )));
            }
        }
        Ok(())
    }

    fn validate_memory_map(&self) -> Result<(), ConfigError> {
        let expect = expected_memory_map(&self.tiles, &self.network_adapter);
        let mut seen: Vec<&MemoryRegion> = Vec::new();
        for region in &self.memory_map {
            if region.size == 0 || region.end() > 1 << 32 {
                return Err(bad(format!("memory region {region:?} out of range")));
            }
            if let Some(t) = region.tile {
                if t as usize >= self.tiles.len() {
                    return Err(bad(format!("memory region references missing tile {t}")));
                }
            }
            let clash = seen.iter().find(|o| {
                same_space(o, region)
                    && (o.base as u64) < region.end()
                    && (region.base as u64) < o.end()
            });
            if let Some(o) = clash {
                return Err(ConfigError::Overlap(format!("{region:?} overlaps {o:?}")));
            }
            seen.push(region);
        }
        if self.memory_map != expect {
            return Err(bad("memory_map does not match the tile list"));
        }
        Ok(())
    }
}

/// Local regions are private to their tile; partitions and the MMIO
/// window share the data address space, which local memory must also stay
/// clear of on the MMIO side.
fn same_space(a: &MemoryRegion, b: &MemoryRegion) -> bool {
    use RegionKind::*;
    match (a.kind, b.kind) {
        (Local, Local) => a.tile == b.tile,
        (Local, Partition) | (Partition, Local) => false,
        _ => true,
    }
}

pub(crate) fn expected_modules(
    tiles: &[TileEntry],
    routers: &[RouterEntry],
) -> Vec<DebugModuleEntry> {
    let count = 1 + tiles.len() + routers.len();
    let mut out = vec![DebugModuleEntry {
        id: 0,
        kind: DebugModuleKind::Extif,
        version: MODULE_VERSION as u32,
        attach: Attachment::Host {
            modules: count as u32,
        },
    }];
    for t in tiles {
        out.push(DebugModuleEntry {
            id: out.len() as u32,
            kind: DebugModuleKind::CoreTrace,
            version: MODULE_VERSION as u32,
            attach: Attachment::Tile { tile: t.id },
        });
    }
    for r in routers {
        out.push(DebugModuleEntry {
            id: out.len() as u32,
            kind: DebugModuleKind::NocStat,
            version: MODULE_VERSION as u32,
            attach: Attachment::Router {
                router: r.id,
                coord: r.coord,
            },
        });
    }
    out
}

pub(crate) fn expected_memory_map(tiles: &[TileEntry], na: &NaParams) -> Vec<MemoryRegion> {
    let mut out: Vec<MemoryRegion> = tiles
        .iter()
        .map(|t| MemoryRegion {
            kind: RegionKind::Local,
            tile: Some(t.id),
            base: 0,
            size: t.memory_bytes,
        })
        .collect();
    for t in tiles {
        if let Some(p) = t.partition_bytes {
            out.push(MemoryRegion {
                kind: RegionKind::Partition,
                tile: Some(t.id),
                base: t.id * p,
                size: p,
            });
        }
    }
    out.push(MemoryRegion {
        kind: RegionKind::Mmio,
        tile: None,
        base: na.mmio_base,
        size: na.mmio_size,
    });
    out
}
