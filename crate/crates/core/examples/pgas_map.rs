// SPDX-License-Identifier: Apache-2.0

//! Show how a partitioned global address space is laid out and how
//! addresses translate from one tile's point of view.
//!
//! `cargo run --example pgas_map`

use tilesoc::na::lsu_translate;
use tilesoc::platform::{map_description, to_canonical_json, PlatformDescription};

fn main() {
    let desc =
        PlatformDescription::from_json(include_str!("../platforms/desc_4x4_pgas.json")).unwrap();
    let cfg = map_description(&desc).unwrap();
    let n = cfg.num_tiles();
    let part = cfg.tiles[0].partition_bytes.expect("pgas platform");
    println!("{n} tiles, {} KiB partitions", part / 1024);
    let regions: Vec<_> = cfg
        .memory_map
        .iter()
        .filter(|r| r.tile.is_some_and(|t| t < 2))
        .collect();
    println!("{}", to_canonical_json(&regions));

    let own = 5;
    for addr in [
        0x0,
        part * 5 + 0x40,
        part * 6 - 4,
        part * 15 + 0x10,
        part * n as u32,
    ] {
        println!(
            "tile {own}: {addr:#010x} -> {:?}",
            lsu_translate(addr, own, part, n)
        );
    }
}
