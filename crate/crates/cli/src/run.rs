// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use tilesoc::debug::ChipLink;
use tilesoc::pe::{assemble, ProgramImage};
use tilesoc::platform::{to_canonical_json, PlatformConfiguration};
use tilesoc::system::{SystemInstance, SystemOptions};

use crate::{CmdResult, Exit, Failure};

/// `tile=<id>:<path>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramArg {
    pub tile: usize,
    pub path: PathBuf,
}

impl FromStr for ProgramArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let rest = s
            .strip_prefix("tile=")
            .ok_or_else(|| format!("expected tile=<id>:<path>, got {s:?}"))?;
        let (id, path) = rest
            .split_once(':')
            .ok_or_else(|| format!("expected tile=<id>:<path>, got {s:?}"))?;
        let tile = id.parse().map_err(|_| format!("bad tile id {id:?}"))?;
        if path.is_empty() {
            return Err("empty program path".into());
        }
        Ok(ProgramArg {
            tile,
            path: PathBuf::from(path),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "config.json")]
    pub config: PathBuf,
    /// Assembly program for one tile; tiles without one run HALT.
    #[arg(long = "program", value_name = "tile=<id>:<path>")]
    pub programs: Vec<ProgramArg>,
    #[arg(long)]
    pub cycles: u64,
    #[arg(long, value_name = "stats.json")]
    pub stats: Option<PathBuf>,
    /// Serve the debug protocol here and wait for a host before cycle 0.
    #[arg(long, value_name = "host:port")]
    pub debug_listen: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn load_error(e: impl std::fmt::Display) -> Failure {
    Failure::new(Exit::Load, e.to_string())
}

pub fn load_programs(args: &[ProgramArg]) -> Result<BTreeMap<usize, ProgramImage>, Failure> {
    let mut out = BTreeMap::new();
    for p in args {
        let src = std::fs::read_to_string(&p.path)
            .map_err(|e| load_error(format!("{}: {e}", p.path.display())))?;
        let image = assemble(&src).map_err(|e| load_error(format!("{}: {e}", p.path.display())))?;
        if out.insert(p.tile, image).is_some() {
            return Err(load_error(format!("two programs for tile {}", p.tile)));
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<PlatformConfiguration, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| load_error(format!("{}: {e}", path.display())))?;
    PlatformConfiguration::from_json(&text)
        .map_err(|e| load_error(format!("{}: {e}", path.display())))
}

pub fn cmd_run(args: &RunArgs) -> CmdResult {
    let config = load_config(&args.config)?;
    let programs = load_programs(&args.programs)?;
    let gated = args.debug_listen.is_some() && config.debug.enabled;
    if args.debug_listen.is_some() && !config.debug.enabled {
        return Err(load_error(
            "--debug-listen needs a configuration with debug enabled",
        ));
    }
    let opts = SystemOptions {
        gated,
        emission_log: false,
        seed: args.seed,
    };
    let mut sys = SystemInstance::new(&config, &programs, opts).map_err(load_error)?;

    if let Some(addr) = &args.debug_listen {
        let listener = TcpListener::bind(addr)
            .map_err(|e| load_error(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(load_error)?;
        eprintln!("debug-listen: {local}");
        let _ = std::io::stderr().flush();
        let (stream, peer) = listener
            .accept()
            .map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;
        eprintln!("host attached from {peer}");
        let link = ChipLink::tcp(stream).map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;
        sys.attach_link(link);
    }

    let result = sys.run(args.cycles);
    sys.finish();
    result.map_err(|e| Failure::new(Exit::Failure, e.to_string()))?;

    let stats = to_canonical_json(&sys.stats());
    match &args.stats {
        Some(path) => std::fs::write(path, stats)
            .map_err(|e| Failure::new(Exit::Failure, format!("{}: {e}", path.display())))?,
        None => print!("{stats}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn program_arg_syntax() {
        let p: ProgramArg = "tile=3:prog/a.s".parse().unwrap();
        assert_eq!(p.tile, 3);
        assert_eq!(p.path, PathBuf::from("prog/a.s"));
        assert!("3:a.s".parse::<ProgramArg>().is_err());
        assert!("tile=x:a.s".parse::<ProgramArg>().is_err());
        assert!("tile=1:".parse::<ProgramArg>().is_err());
    }
}
