// SPDX-License-Identifier: Apache-2.0

//! Pattern-level platform description.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "pattern": "mesh",
//!   "width": 2,
//!   "height": 2,
//!   "tile": { "cores": 1, "memory_kib": 64, "org": "distributed" },
//!   "noc": { "vcs": 3, "buffer_depth": 4, "flit_width": 32 },
//!   "debug": { "enabled": true, "nocstat_window": 256 }
//! }
//! ```
//!
//! Tiles with `"org": "pgas"` need a `"pgas": { "partition_kib": n }`
//! section; `partition_kib` must be a power of two of at least 4 and no
//! larger than `memory_kib`.

use serde::{Deserialize, Serialize};

use super::{ValidationError, SCHEMA_VERSION};
use crate::debug::DEFAULT_NOCSTAT_WINDOW;
use crate::noc::{DATA_FLIT_WIDTH, MAX_TILES};
use crate::pe::MMIO_BASE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Mesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Org {
    Distributed,
    Pgas,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileTemplate {
    pub cores: u32,
    pub memory_kib: u32,
    pub org: Org,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NocParams {
    pub vcs: u32,
    pub buffer_depth: u32,
    pub flit_width: u32,
}

impl Default for NocParams {
    fn default() -> Self {
        NocParams {
            vcs: 3,
            buffer_depth: 4,
            flit_width: DATA_FLIT_WIDTH,
        }
    }
}

fn default_window() -> u32 {
    DEFAULT_NOCSTAT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebugParams {
    pub enabled: bool,
    #[serde(default = "default_window")]
    pub nocstat_window: u32,
}

impl Default for DebugParams {
    fn default() -> Self {
        DebugParams {
            enabled: true,
            nocstat_window: DEFAULT_NOCSTAT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgasParams {
    pub partition_kib: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformDescription {
    pub schema_version: u32,
    pub pattern: Pattern,
    pub width: u32,
    pub height: u32,
    pub tile: TileTemplate,
    #[serde(default)]
    pub noc: NocParams,
    #[serde(default)]
    pub debug: DebugParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pgas: Option<PgasParams>,
}

fn fail(path: &str, message: impl Into<String>) -> Result<(), ValidationError> {
    Err(ValidationError::new(path, message))
}

impl PlatformDescription {
    /// A distributed-memory mesh with default parameters.
    pub fn mesh(width: u32, height: u32) -> Self {
        PlatformDescription {
            schema_version: SCHEMA_VERSION,
            pattern: Pattern::Mesh,
            width,
            height,
            tile: TileTemplate {
                cores: 1,
                memory_kib: 64,
                org: Org::Distributed,
            },
            noc: NocParams::default(),
            debug: DebugParams::default(),
            pgas: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        let d: PlatformDescription =
            serde_json::from_str(text).map_err(|e| ValidationError::new("$", e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn tiles(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.schema_version != SCHEMA_VERSION {
            fail("schema_version", format!("expected {SCHEMA_VERSION}"))?;
        }
        if self.width < 1 {
            fail("width", "must be at least 1")?;
        }
        if self.height < 1 {
            fail("height", "must be at least 1")?;
        }
        let n = self.width as u64 * self.height as u64;
        if n > MAX_TILES as u64 {
            fail(
                "width",
                format!("{n} tiles exceed the limit of {MAX_TILES}"),
            )?;
        }
        if self.tile.cores != 1 {
            fail("tile.cores", "only one core per tile is supported")?;
        }
        let mem = self.tile.memory_kib;
        if !mem.is_power_of_two() || mem < 4 || mem as u64 * 1024 > MMIO_BASE as u64 {
            fail(
                "tile.memory_kib",
                "must be a power of two between 4 and the MMIO base",
            )?;
        }
        if self.noc.vcs < 3 {
            fail(
                "noc.vcs",
                "at least 3 virtual channels are needed (one per class)",
            )?;
        }
        if self.noc.vcs > 16 {
            fail("noc.vcs", "at most 16 virtual channels")?;
        }
        if self.noc.buffer_depth < 1 || self.noc.buffer_depth > 64 {
            fail("noc.buffer_depth", "must be between 1 and 64")?;
        }
        if self.noc.flit_width != DATA_FLIT_WIDTH {
            fail(
                "noc.flit_width",
                format!("only {DATA_FLIT_WIDTH}-bit flits are supported"),
            )?;
        }
        if self.debug.enabled && 1 + 2 * n > 255 {
            fail(
                "debug.enabled",
                format!("{n} tiles need more than 254 debug modules"),
            )?;
        }
        if !(1..=u16::MAX as u32).contains(&self.debug.nocstat_window) {
            fail("debug.nocstat_window", "must be between 1 and 65535")?;
        }
        match (self.tile.org, &self.pgas) {
            (Org::Pgas, None) => fail("pgas", "required when tile.org is pgas")?,
            (Org::Distributed, Some(_)) => fail("pgas", "only allowed when tile.org is pgas")?,
            (Org::Pgas, Some(p)) => {
                let k = p.partition_kib;
                if !k.is_power_of_two() || k < 4 || k > mem {
                    fail(
                        "pgas.partition_kib",
                        "must be a power of two between 4 and tile.memory_kib",
                    )?;
                }
                if n * k as u64 * 1024 > MMIO_BASE as u64 {
                    fail(
                        "pgas.partition_kib",
                        "global address space overlaps the MMIO window",
                    )?;
                }
            }
            (Org::Distributed, None) => {}
        }
        Ok(())
    }
}
