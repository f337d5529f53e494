// SPDX-License-Identifier: Apache-2.0

//! Two-step platform generation: a pattern-level [`PlatformDescription`]
//! expands into an explicit [`PlatformConfiguration`], which instantiates a
//! runnable [`SystemInstance`](crate::system::SystemInstance).
//!
//! Both documents are JSON with a mandatory `schema_version`. Output goes
//! through [`to_canonical_json`] (sorted keys, two-space indent, trailing
//! newline), so identical inputs give byte-identical files.

pub mod config;
pub mod description;

pub use config::{
    Attachment, DebugConfig, DebugModuleEntry, DebugModuleKind, MemoryRegion, MeshShape, NaParams,
    PlatformConfiguration, PortWiring, RegionKind, RouterEntry, TileEntry,
};
pub use description::{
    DebugParams, NocParams, Org, Pattern, PgasParams, PlatformDescription, TileTemplate,
};

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::debug::RING_DEPTH;
use crate::noc::{Coord, Port};
use crate::pe::ProgramImage;
use crate::system::{SystemInstance, SystemOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// A description field that failed validation, addressed by dotted path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: &str, message: impl Into<String>) -> Self {
        ValidationError {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("overlapping memory map: {0}")]
    Overlap(String),
    #[error("program for tile {tile}: {message}")]
    Program { tile: usize, message: String },
}

/// Serialize with sorted object keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's default map is ordered, so a round trip through Value
    // sorts every object's keys.
    let v = serde_json::to_value(value).expect("platform documents are plain data");
    let mut s = serde_json::to_string_pretty(&v).expect("serializing a Value cannot fail");
    s.push('\n');
    s
}

/// Expand a description into a configuration. Tiles and routers are listed
/// in row-major order; debug ids follow the ring addressing rule.
pub fn map_description(
    desc: &PlatformDescription,
) -> Result<PlatformConfiguration, ValidationError> {
    desc.validate()?;
    let (w, h) = (desc.width as usize, desc.height as usize);
    let partition = match desc.tile.org {
        Org::Pgas => desc.pgas.as_ref().map(|p| p.partition_kib * 1024),
        Org::Distributed => None,
    };
    let mut tiles = Vec::with_capacity(w * h);
    let mut routers = Vec::with_capacity(w * h);
    for id in 0..w * h {
        let c = Coord::of_tile(id, w);
        let coord = [c.x as u32, c.y as u32];
        let link = |p: Port| c.neighbor(p, w, h).map(|n| n.tile(w) as u32);
        routers.push(RouterEntry {
            id: id as u32,
            coord,
            ports: PortWiring {
                north: link(Port::North),
                east: link(Port::East),
                south: link(Port::South),
                west: link(Port::West),
                local: id as u32,
            },
        });
        tiles.push(TileEntry {
            id: id as u32,
            coord,
            router: id as u32,
            memory_bytes: desc.tile.memory_kib * 1024,
            org: desc.tile.org,
            partition_bytes: partition,
        });
    }
    let modules = if desc.debug.enabled {
        config::expected_modules(&tiles, &routers)
    } else {
        Vec::new()
    };
    let network_adapter = NaParams::default();
    let memory_map = config::expected_memory_map(&tiles, &network_adapter);
    let cfg = PlatformConfiguration {
        schema_version: SCHEMA_VERSION,
        mesh: MeshShape {
            width: desc.width,
            height: desc.height,
        },
        noc: desc.noc.clone(),
        network_adapter,
        tiles,
        routers,
        debug: DebugConfig {
            enabled: desc.debug.enabled,
            nocstat_window: desc.debug.nocstat_window,
            ring_depth: RING_DEPTH as u32,
            modules,
        },
        memory_map,
    };
    debug_assert_eq!(cfg.validate(), Ok(()));
    Ok(cfg)
}

/// Instantiate a configuration. Tiles without a program run a single HALT.
pub fn map_configuration(
    config: &PlatformConfiguration,
    programs: &BTreeMap<usize, ProgramImage>,
) -> Result<SystemInstance, ConfigError> {
    SystemInstance::new(config, programs, SystemOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_counts() {
        let cfg = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
        assert_eq!(cfg.tiles.len(), 4);
        assert_eq!(cfg.routers.len(), 4);
        assert_eq!(cfg.debug.modules.len(), 9);
        assert_eq!(cfg.routers[0].ports.east, Some(1));
        assert_eq!(cfg.routers[0].ports.south, Some(2));
        assert_eq!(cfg.routers[0].ports.north, None);
    }

    #[test]
    fn one_by_one_has_only_a_local_port() {
        let cfg = map_description(&PlatformDescription::mesh(1, 1)).unwrap();
        let p = &cfg.routers[0].ports;
        assert_eq!(
            (p.north, p.east, p.south, p.west, p.local),
            (None, None, None, None, 0)
        );
        assert_eq!(cfg.debug.modules.len(), 3);
    }

    #[test]
    fn validation_paths() {
        let mut d = PlatformDescription::mesh(2, 2);
        d.noc.vcs = 2;
        assert_eq!(map_description(&d).unwrap_err().path, "noc.vcs");
        let mut d = PlatformDescription::mesh(2, 2);
        d.tile.memory_kib = 48;
        assert_eq!(map_description(&d).unwrap_err().path, "tile.memory_kib");
        let mut d = PlatformDescription::mesh(0, 2);
        d.debug.enabled = false;
        assert_eq!(map_description(&d).unwrap_err().path, "width");
        let mut d = PlatformDescription::mesh(2, 2);
        d.tile.org = Org::Pgas;
        assert_eq!(map_description(&d).unwrap_err().path, "pgas");
        let mut d = PlatformDescription::mesh(16, 16);
        d.debug.enabled = true;
        assert_eq!(map_description(&d).unwrap_err().path, "debug.enabled");
    }

    #[test]
    fn json_parse_errors_use_root_path() {
        let e = PlatformDescription::from_json("{\"schema_version\": 1}").unwrap_err();
        assert_eq!(e.path, "$");
    }

    #[test]
    fn canonical_output_round_trips() {
        let cfg = map_description(&PlatformDescription::mesh(3, 2)).unwrap();
        let text = to_canonical_json(&cfg);
        let back = PlatformConfiguration::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(to_canonical_json(&back), text);
    }

    #[test]
    fn missing_router_is_rejected() {
        let mut cfg = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
        cfg.routers.remove(1);
        match cfg.validate() {
            Err(ConfigError::Invalid(m)) => assert!(m.contains("missing router (1,0)"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_and_overlap_are_rejected() {
        let base = map_description(&PlatformDescription::mesh(2, 2)).unwrap();
        let mut cfg = base.clone();
        cfg.tiles[2].router = 9;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));

        let mut cfg = base.clone();
        cfg.memory_map.push(MemoryRegion {
            kind: RegionKind::Mmio,
            tile: None,
            base: 0xFFFF_0080,
            size: 0x100,
        });
        assert!(matches!(cfg.validate(), Err(ConfigError::Overlap(_))));

        let mut cfg = base;
        cfg.debug.modules.swap(1, 2);
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
